use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};

use super::SymMat;

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(())
}

/// Logarithmic 2-norm: largest eigenvalue of `(A + Aᵀ)/2`.
pub fn log_norm(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a)?;
    Ok(SymMat::sym_part(a).lambda_max())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a)?;
    Ok(a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Operator 2-norm of a general matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let g = SymMat::sym_part(&(a.transpose() * a));
    g.lambda_max().max(0.0).sqrt()
}

/// `min_perm max_i |a_i − b_perm(i)|`.
pub fn matching_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let n = a.len();
    if n == 0 {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    if n <= 8 {
        Ok(enumerate_permutations(&cost))
    } else {
        Ok(bottleneck(&cost))
    }
}

fn enumerate_permutations(cost: &[Vec<f64>]) -> f64 {
    // Heap's algorithm over all n! assignments.
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| (0..n).map(|i| cost[i][p[i]]).fold(0.0f64, f64::max);
    let mut best = eval(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Exact bottleneck assignment: binary search over the sorted costs with a
/// bipartite perfect-matching feasibility test.
fn bottleneck(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let feasible = |thr: f64| {
        let mut match_b: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let mut seen = vec![false; n];
            if !augment(i, thr, cost, &mut seen, &mut match_b) {
                return false;
            }
        }
        true
    };
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    levels[lo]
}

fn augment(i: usize, thr: f64, cost: &[Vec<f64>], seen: &mut [bool], match_b: &mut [Option<usize>]) -> bool {
    for j in 0..cost.len() {
        if cost[i][j] <= thr && !seen[j] {
            seen[j] = true;
            if match_b[j].is_none_or(|k| augment(k, thr, cost, seen, match_b)) {
                match_b[j] = Some(i);
                return true;
            }
        }
    }
    false
}

/// Optimal matching distance between the (complex) spectra of two square
/// matrices.
pub fn spectrum_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_square(a)?;
    check_square(b)?;
    check_dim(a.nrows(), b.nrows())?;
    let ea: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    let eb: Vec<Complex64> = b.complex_eigenvalues().iter().copied().collect();
    matching_distance(&ea, &eb)
}

/// `‖A−B‖²_F − Σ (λ_i(A) − λ_i(B))²`, non-negative up to rounding.
pub fn hw_gap(a: &SymMat, b: &SymMat) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let la = a.eigenvalues();
    let lb = b.eigenvalues();
    let spec: f64 = la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((a - b).inner(&(a - b)) - spec)
}

/// Ratio of the two sides of the Krause/Friedland perturbation bound,
///
/// `[d(Spec A, Spec B) ∨ |det A − det B|^{1/r}] / [(‖A‖∨‖B‖)^{1−1/r} ‖A−B‖^{1/r}]`.
///
/// Returns 0 when `A = B`.
pub fn krause_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let d = spectrum_distance(a, b)?;
    let r = a.nrows() as f64;
    let ddet = (a.determinant() - b.determinant()).abs().powf(1.0 / r);
    let diff = spectral_norm(&(a - b));
    if diff == 0.0 {
        return Ok(0.0);
    }
    let scale = spectral_norm(a).max(spectral_norm(b));
    Ok(d.max(ddet) / (scale.powf(1.0 - 1.0 / r) * diff.powf(1.0 / r)))
}

/// `Tr(P⁻¹R + PS) − 2√Tr(RS)` for SPD `P` and PSD `R`, `S`.
pub fn trace_inequality_gap(p: &SymMat, r: &SymMat, s: &SymMat) -> Result<f64> {
    check_dim(p.dim(), r.dim())?;
    check_dim(p.dim(), s.dim())?;
    let pinv = p.inverse()?;
    let rs = r.inner(s).max(0.0);
    Ok(pinv.inner(r) + p.inner(s) - 2.0 * rs.sqrt())
}
