//! Symmetric matrices, spectral helpers and the half-vectorization.
//!
//! [`SymMat`] stores only the upper triangle, so symmetry holds by
//! construction. Decompositions go through a cyclic Jacobi solver which is
//! accurate for the small dimensions used here.

mod eigen;
mod spectrum;
mod tensor;
mod vech;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub use eigen::{sym_eigen, SpectralDecomp, JACOBI_TOL};
pub use spectrum::{
    hw_gap, krause_ratio, log_norm, matching_distance, spectral_abscissa, spectral_norm,
    spectrum_distance, trace_inequality_gap,
};
pub use tensor::{sym_tensor_embed, sym_tensor_embed_sqrt};
pub(crate) use tensor::{embed_unchecked, psd_sqrt_dense};
pub use vech::{half_dim, unvech, vech, VecHalf};

/// Dense real symmetric matrix in packed upper-triangular row-major storage.
#[derive(Clone, PartialEq)]
pub struct SymMat {
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn row_offset(n: usize, i: usize) -> usize {
    i * (2 * n - i + 1) / 2
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMat dimension must be positive");
        SymMat { dim, data: vec![0.0; dim * (dim + 1) / 2] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from `f(i, j)` evaluated for `i ≤ j`.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(dim: usize, mut f: F) -> Self {
        let mut m = Self::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                m.data[k] = f(i, j);
                k += 1;
            }
        }
        m
    }

    /// Wraps an already packed upper triangle.
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        check_dim(dim * (dim + 1) / 2, data.len())?;
        Ok(SymMat { dim, data })
    }

    /// Builds from a full matrix that must be symmetric up to rounding
    /// (`1e-12` relative to its Frobenius norm).
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let asym = (m - m.transpose()).norm();
        if asym > 1e-12 * (1.0 + m.norm()) {
            return Err(Error::InvalidArgument(format!("matrix is not symmetric (‖M−Mᵀ‖ = {asym:e})")));
        }
        Ok(Self::sym_part(m))
    }

    /// Row-major convenience constructor with the same symmetry check as
    /// [`SymMat::from_dense`].
    pub fn from_row_slice(dim: usize, rows: &[f64]) -> Result<Self> {
        check_dim(dim * dim, rows.len())?;
        Self::from_dense(&DMatrix::from_row_slice(dim, dim, rows))
    }

    /// `(M + Mᵀ)/2` of a square matrix.
    pub fn sym_part(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "sym_part needs a square matrix");
        Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j < self.dim);
        row_offset(self.dim, i) + (j - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.data[k] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `Tr(XY)`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.data[k] * other.data[k];
                k += 1;
            }
        }
        acc
    }

    pub fn frob_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let d = self.eig();
        d.lambda_max().abs().max(d.lambda_min().abs())
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat { dim: self.dim, data: self.data.iter().map(|x| c * x).collect() }
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: f64, other: &SymMat) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn add_diag(&self, c: f64) -> SymMat {
        let mut m = self.clone();
        for i in 0..self.dim {
            let k = m.index(i, i);
            m.data[k] += c;
        }
        m
    }

    pub fn max_abs_diff(&self, other: &SymMat) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn eig(&self) -> SpectralDecomp {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                a[j * n + i] = self.get(i, j);
            }
        }
        let mut v = vec![0.0; n * n];
        eigen::jacobi_in_place(&mut a, &mut v, n);
        let vals = (0..n).map(|i| a[i * n + i]).collect();
        eigen::canonicalize(vals, v, n)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            return vec![self.data[0]];
        }
        self.eig().eigenvalues
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty")
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.lambda_min() >= -tol
    }

    /// `B ⪯ A` test: `λ_min(other − self) ≥ −tol`.
    pub fn loewner_le(&self, other: &SymMat, tol: f64) -> bool {
        (other - self).lambda_min() >= -tol
    }

    /// Inverse through the spectral decomposition.
    pub fn inverse(&self) -> Result<SymMat> {
        let d = self.eig();
        let scale = d.lambda_max().abs().max(d.lambda_min().abs());
        if d.eigenvalues.iter().any(|l| l.abs() <= 1e-300 || l.abs() <= 1e-15 * scale) {
            return Err(Error::InvalidArgument("matrix is singular".into()));
        }
        Ok(d.map(|l| 1.0 / l))
    }

    pub fn det(&self) -> f64 {
        self.eigenvalues().iter().product()
    }

    /// Log-determinant of a positive definite matrix.
    pub fn logdet(&self) -> Result<f64> {
        let vals = self.eigenvalues();
        if vals.iter().any(|&l| l <= 0.0) {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: *vals.last().unwrap(),
                tolerance: 0.0,
            });
        }
        Ok(vals.iter().map(|l| l.ln()).sum())
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim);
        DVector::from_fn(self.dim, |i, _| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
    }

    /// `xᵀ M x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += self.get(i, i) * x[i] * x[i];
            for j in i + 1..self.dim {
                acc += 2.0 * self.get(i, j) * x[i] * x[j];
            }
        }
        acc
    }

    /// `M · self · Mᵀ` for a rectangular `M` (rows of `M` give the output size).
    pub fn congruence(&self, m: &DMatrix<f64>) -> SymMat {
        assert_eq!(m.ncols(), self.dim);
        let x = m * self.to_dense() * m.transpose();
        SymMat::sym_part(&x)
    }

    /// `self · M · self` for symmetric `M`.
    pub fn sandwich(&self, m: &SymMat) -> SymMat {
        let s = self.to_dense();
        SymMat::sym_part(&(&s * m.to_dense() * &s))
    }

    /// `sym(self · M) = (self·M + M·self)/2`.
    pub fn jordan(&self, m: &SymMat) -> SymMat {
        SymMat::sym_part(&(self.to_dense() * m.to_dense()))
    }

    /// Eigenvalues below zero are set to zero. Returns the projected
    /// matrix and whether any eigenvalue was changed.
    pub fn floor_psd(&self) -> (SymMat, bool) {
        let d = self.eig();
        if d.lambda_min() >= 0.0 {
            return (self.clone(), false);
        }
        (d.map(|l| l.max(0.0)), true)
    }
}

/// Matrix exponential (Padé approximation with scaling and squaring).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.exp()
}

/// Tolerance below which negative eigenvalues are treated as rounding noise.
pub fn tol_psd(p: &SymMat) -> f64 {
    1e-10 * (1.0 + p.spectral_norm())
}

/// Unique PSD square root. Negative eigenvalues within [`tol_psd`] are
/// floored at zero.
pub fn sqrt_psd(p: &SymMat) -> Result<SymMat> {
    let d = p.eig();
    sqrt_from_decomp(&d)
}

/// [`sqrt_psd`] from an existing decomposition.
pub fn sqrt_from_decomp(d: &SpectralDecomp) -> Result<SymMat> {
    let tol = 1e-10 * (1.0 + d.lambda_max().abs().max(d.lambda_min().abs()));
    let lmin = d.lambda_min();
    if lmin < -tol {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lmin, tolerance: tol });
    }
    Ok(d.map(|l| l.max(0.0).sqrt()))
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMat{:?}", self.to_dense().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
    }
}

impl fmt::Display for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dense())
    }
}

impl std::ops::Index<(usize, usize)> for SymMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[SymMat::index(self, i, j)]
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&SymMat> for &SymMat {
            type Output = SymMat;
            fn $f(self, rhs: &SymMat) -> SymMat {
                assert_eq!(self.dim, rhs.dim, "SymMat dimension mismatch");
                SymMat {
                    dim: self.dim,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr<SymMat> for SymMat {
            type Output = SymMat;
            fn $f(self, rhs: SymMat) -> SymMat {
                &self $op &rhs
            }
        }
        impl $tr<&SymMat> for SymMat {
            type Output = SymMat;
            fn $f(self, rhs: &SymMat) -> SymMat {
                &self $op rhs
            }
        }
        impl $tr<SymMat> for &SymMat {
            type Output = SymMat;
            fn $f(self, rhs: SymMat) -> SymMat {
                self $op &rhs
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);

impl AddAssign<&SymMat> for SymMat {
    fn add_assign(&mut self, rhs: &SymMat) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SymMat> for SymMat {
    fn sub_assign(&mut self, rhs: &SymMat) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, c: f64) -> SymMat {
        self.scale(c)
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(mut self, c: f64) -> SymMat {
        self.data.iter_mut().for_each(|x| *x *= c);
        self
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self * -1.0
    }
}
