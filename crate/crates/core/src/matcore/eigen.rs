//! Cyclic Jacobi eigendecomposition for small dense symmetric matrices.

use nalgebra::DMatrix;

use super::SymMat;

/// Relative off-diagonal tolerance at which a Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 64;

/// Eigenvalues sorted descending with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> SymMat {
        let n = self.dim();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += v[(i, k)] * fl[k] * v[(j, k)];
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymMat {
        self.map(|l| l)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// Eigenvector `i` as a slice-backed column.
    pub fn vector(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.eigenvectors.column(i)
    }
}

/// In-place cyclic Jacobi on a column-major symmetric `n×n` buffer.
///
/// On return the diagonal of `a` holds the (unsorted) eigenvalues and the
/// columns of `v` the matching eigenvectors.
pub(crate) fn jacobi_in_place(a: &mut [f64], v: &mut [f64], n: usize) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(v.len(), n * n);
    v.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n == 1 {
        return;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 || !frob.is_finite() {
        return;
    }
    let idx = |i: usize, j: usize| j * n + i;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for q in 1..n {
            for p in 0..q {
                off += a[idx(p, q)] * a[idx(p, q)];
            }
        }
        if off.sqrt() <= JACOBI_TOL * 1e-2 * frob {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[idx(k, p)];
                    let vkq = v[idx(k, q)];
                    v[idx(k, p)] = c * vkp - s * vkq;
                    v[idx(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
}

/// Sort descending, fix eigenvector signs (first non-negligible component
/// positive) and order ties lexicographically by eigenvector.
pub(crate) fn canonicalize(vals: Vec<f64>, vecs: Vec<f64>, n: usize) -> SpectralDecomp {
    let mut cols: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut col = vecs[k * n..(k + 1) * n].to_vec();
            if let Some(first) = col.iter().find(|x| x.abs() > 1e-14) {
                if *first < 0.0 {
                    col.iter_mut().for_each(|x| *x = -*x);
                }
            }
            (vals[k], col)
        })
        .collect();
    let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    cols.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-13 * scale {
            b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let eigenvalues = cols.iter().map(|c| c.0).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| cols[k].1[i]);
    SpectralDecomp { eigenvalues, eigenvectors }
}

/// Eigendecomposition of a dense symmetric matrix (only the upper triangle
/// is read).
pub fn sym_eigen(m: &DMatrix<f64>) -> SpectralDecomp {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "sym_eigen needs a square matrix");
    let mut a = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (p, q) = if i <= j { (i, j) } else { (j, i) };
            a[j * n + i] = m[(p, q)];
        }
    }
    let mut v = vec![0.0; n * n];
    jacobi_in_place(&mut a, &mut v, n);
    let vals = (0..n).map(|i| a[i * n + i]).collect();
    canonicalize(vals, v, n)
}
