use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::matcore::{spectral_norm, tol_psd, SymMat};

/// Binary switch selecting the diffusion map `Σ_{κ,ϖ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kappa {
    Zero,
    One,
}

impl Kappa {
    pub fn as_f64(self) -> f64 {
        match self {
            Kappa::Zero => 0.0,
            Kappa::One => 1.0,
        }
    }

    pub fn from_int(k: i64) -> Result<Self> {
        match k {
            0 => Ok(Kappa::Zero),
            1 => Ok(Kappa::One),
            _ => Err(Error::InvalidArgument(format!("kappa must be 0 or 1, got {k}"))),
        }
    }
}

/// One Riccati diffusion instance `(A, R, S, κ, ϖ, ε)` with the derived
/// bound matrices `U = R + κϖS(S+ϖI)` and `V = κ(S+ϖI)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    a: DMatrix<f64>,
    r: SymMat,
    s: SymMat,
    kappa: Kappa,
    varpi: f64,
    eps: f64,
    u: SymMat,
    v: SymMat,
    stabilizable: bool,
    detectable: bool,
}

impl ModelParams {
    pub fn new(a: DMatrix<f64>, r: SymMat, s: SymMat, kappa: Kappa, varpi: f64, eps: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        check_dim(a.nrows(), r.dim())?;
        check_dim(a.nrows(), s.dim())?;
        if !a.iter().all(|x| x.is_finite()) || !r.is_finite() || !s.is_finite() {
            return Err(Error::InvalidArgument("model matrices must be finite".into()));
        }
        for m in [&r, &s] {
            let lmin = m.lambda_min();
            let tol = tol_psd(m);
            if lmin < -tol {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lmin, tolerance: tol });
            }
        }
        if !(varpi.is_finite() && varpi >= 0.0) {
            return Err(Error::InvalidArgument(format!("varpi must be finite and ≥ 0, got {varpi}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be finite and ≥ 0, got {eps}")));
        }
        let (u, v) = bound_matrices(&r, &s, kappa, varpi);
        let stabilizable = pbh_stabilizable(&a, &r);
        let detectable = pbh_stabilizable(&a.transpose(), &s);
        Ok(ModelParams { a, r, s, kappa, varpi, eps, u, v, stabilizable, detectable })
    }

    /// Scalar model `r = 1`.
    pub fn scalar(a: f64, r: f64, s: f64, kappa: Kappa, varpi: f64, eps: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            SymMat::from_diag(&[r]),
            SymMat::from_diag(&[s]),
            kappa,
            varpi,
            eps,
        )
    }

    /// `A = aI`, `R = rI`, `S = sI` in dimension `dim`.
    pub fn isotropic(dim: usize, a: f64, r: f64, s: f64, kappa: Kappa, varpi: f64, eps: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(dim, dim) * a,
            SymMat::scaled_identity(dim, r),
            SymMat::scaled_identity(dim, s),
            kappa,
            varpi,
            eps,
        )
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be finite and ≥ 0, got {eps}")));
        }
        let mut p = self.clone();
        p.eps = eps;
        Ok(p)
    }

    /// Same model with the drift matrix replaced.
    pub fn with_drift(&self, a: DMatrix<f64>) -> Result<Self> {
        Self::new(a, self.r.clone(), self.s.clone(), self.kappa, self.varpi, self.eps)
    }

    pub fn with_kappa(&self, kappa: Kappa) -> Self {
        let mut p = self.clone();
        p.kappa = kappa;
        let (u, v) = bound_matrices(&p.r, &p.s, kappa, p.varpi);
        p.u = u;
        p.v = v;
        p
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn r(&self) -> &SymMat {
        &self.r
    }
    pub fn s(&self) -> &SymMat {
        &self.s
    }
    pub fn kappa(&self) -> Kappa {
        self.kappa
    }
    pub fn varpi(&self) -> f64 {
        self.varpi
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn u(&self) -> &SymMat {
        &self.u
    }
    pub fn v(&self) -> &SymMat {
        &self.v
    }
    pub fn is_stabilizable(&self) -> bool {
        self.stabilizable
    }
    pub fn is_detectable(&self) -> bool {
        self.detectable
    }
}

fn bound_matrices(r: &SymMat, s: &SymMat, kappa: Kappa, varpi: f64) -> (SymMat, SymMat) {
    let k = kappa.as_f64();
    let s_shift = s.add_diag(varpi);
    let u = if k == 0.0 || varpi == 0.0 {
        r.clone()
    } else {
        r + &s.jordan(&s_shift).scale(k * varpi)
    };
    let v = s_shift.scale(k);
    (u, v)
}

/// PBH test: `(A, R^{1/2})` is stabilizable iff `rank [A − λI, R^{1/2}] = r`
/// for every eigenvalue with `Re λ ≥ 0`. Rank tolerance `1e-8·max(‖A‖₂, 1)`.
pub(crate) fn pbh_stabilizable(a: &DMatrix<f64>, r: &SymMat) -> bool {
    let n = a.nrows();
    let b = match crate::matcore::sqrt_psd(r) {
        Ok(b) => b.to_dense(),
        Err(_) => return false,
    };
    let norm_a = spectral_norm(a).max(1.0);
    let tol = 1e-8 * norm_a;
    let eig_tol = 1e-12 * norm_a;
    for lam in a.complex_eigenvalues().iter() {
        if lam.re < -eig_tol {
            continue;
        }
        let m = DMatrix::<Complex64>::from_fn(n, 2 * n, |i, j| {
            if j < n {
                let d = if i == j { *lam } else { Complex64::new(0.0, 0.0) };
                Complex64::new(a[(i, j)], 0.0) - d
            } else {
                Complex64::new(b[(i, j - n)], 0.0)
            }
        });
        let sv = m.singular_values();
        let rank = sv.iter().filter(|&&x| x > tol).count();
        if rank < n {
            return false;
        }
    }
    true
}

/// Riccati drift `Θ(P) = AP + PAᵀ + R − PSP`.
pub fn drift_theta(p: &SymMat, params: &ModelParams) -> Result<SymMat> {
    check_dim(params.dim(), p.dim())?;
    Ok(theta_dense(params.a(), params.r(), params.s(), p))
}

pub(crate) fn theta_dense(a: &DMatrix<f64>, r: &SymMat, s: &SymMat, p: &SymMat) -> SymMat {
    let pd = p.to_dense();
    let ap = a * &pd;
    let sd = s.to_dense();
    let psp = &pd * sd * &pd;
    let n = p.dim();
    SymMat::from_fn(n, |i, j| ap[(i, j)] + ap[(j, i)] + r.get(i, j) - 0.5 * (psp[(i, j)] + psp[(j, i)]))
}

/// Diffusion map `Σ_{κ,ϖ}(P) = R + κ(P+ϖI)S(P+ϖI)`.
pub fn sigma_map(p: &SymMat, params: &ModelParams) -> Result<SymMat> {
    check_dim(params.dim(), p.dim())?;
    let lmin = p.lambda_min();
    let tol = tol_psd(p);
    if lmin < -tol {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lmin, tolerance: tol });
    }
    Ok(sigma_unchecked(p, params))
}

pub(crate) fn sigma_unchecked(p: &SymMat, params: &ModelParams) -> SymMat {
    match params.kappa() {
        Kappa::Zero => params.r().clone(),
        Kappa::One => params.r() + &p.add_diag(params.varpi()).sandwich(params.s()),
    }
}

/// The pair `(U, V)` with `Σ_{κ,ϖ}(P) ⪯ U + PVP`.
pub fn uv_bound(params: &ModelParams) -> (SymMat, SymMat) {
    (params.u().clone(), params.v().clone())
}
