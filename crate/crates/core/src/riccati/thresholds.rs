use std::fmt;

use crate::error::{Error, Result};
use crate::matcore::SymMat;

use super::ModelParams;

/// A noise threshold; `Unbounded` is the sentinel for `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Unbounded,
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::Finite(x) => x,
            Threshold::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Threshold::Unbounded)
    }

    /// `eps ≤ threshold`.
    pub fn admits(self, eps: f64) -> bool {
        match self {
            Threshold::Finite(x) => eps <= x,
            Threshold::Unbounded => true,
        }
    }

    pub fn min(self, other: Threshold) -> Threshold {
        match (self, other) {
            (Threshold::Unbounded, t) | (t, Threshold::Unbounded) => t,
            (Threshold::Finite(a), Threshold::Finite(b)) => Threshold::Finite(a.min(b)),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(x) => write!(f, "{x}"),
            Threshold::Unbounded => write!(f, "inf"),
        }
    }
}

/// Noise thresholds of a model at moment order `n`, together with the
/// shrunk matrices `R^ε, S^ε, R^ε_n, S^ε_n` evaluated at the model's ε.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub n: usize,
    pub eps0: Threshold,
    pub eps_n_v: Threshold,
    pub eps_n_uv: Threshold,
    pub r_eps: SymMat,
    pub s_eps: SymMat,
    pub r_eps_n: SymMat,
    pub s_eps_n: SymMat,
    /// Set when some threshold collapses to zero (singular `R` or `S`).
    pub degenerate: bool,
}

impl Thresholds {
    /// `ε_n(V) ∧ ε_n(U,V)`, the range of uniform `n`-th moment bounds.
    pub fn moment_range(&self) -> Threshold {
        self.eps_n_v.min(self.eps_n_uv)
    }
}

/// `sup{c ≥ 0 : R − cU ⪰ 0}` for PSD `R`, `U`.
pub(crate) fn loewner_ratio(r: &SymMat, u: &SymMat) -> Threshold {
    let du = u.eig();
    let scale_u = du.lambda_max().abs().max(du.lambda_min().abs());
    if scale_u == 0.0 {
        return Threshold::Unbounded;
    }
    let dr = r.eig();
    let scale_r = dr.lambda_max().abs().max(1e-300);
    let n = r.dim();
    let keep: Vec<usize> = (0..n).filter(|&k| dr.eigenvalues[k] > 1e-12 * scale_r).collect();
    let w = &dr.eigenvectors;
    let ud = u.to_dense();
    // Component of U outside range(R) must vanish.
    let mut proj = nalgebra::DMatrix::<f64>::identity(n, n);
    for &k in &keep {
        let col = w.column(k);
        proj -= &col * col.transpose();
    }
    let outside = (&proj * &ud * &proj).norm();
    if outside > 1e-12 * scale_u * (n as f64) {
        return Threshold::Finite(0.0);
    }
    if keep.is_empty() {
        return Threshold::Finite(0.0);
    }
    let m = keep.len();
    let t = nalgebra::DMatrix::from_fn(m, m, |i, j| {
        let (ki, kj) = (keep[i], keep[j]);
        let wi = w.column(ki);
        let wj = w.column(kj);
        (wi.transpose() * &ud * wj)[(0, 0)] / (dr.eigenvalues[ki] * dr.eigenvalues[kj]).sqrt()
    });
    let lmax = SymMat::sym_part(&t).lambda_max();
    if lmax <= 0.0 {
        Threshold::Unbounded
    } else {
        Threshold::Finite(1.0 / lmax)
    }
}

/// Computes `ε₀`, `ε_n(V)`, `ε_n(U,V)` and the shrunk matrices.
pub fn thresholds(params: &ModelParams, n: usize) -> Result<Thresholds> {
    if n == 0 {
        return Err(Error::InvalidArgument("moment order n must be ≥ 1".into()));
    }
    let r = params.dim() as f64;
    let nf = n as f64;
    let (u, v) = (params.u(), params.v());

    let eps0 = if params.varpi() == 0.0 {
        Threshold::Finite(2.0 / (r + 1.0).sqrt())
    } else {
        match loewner_ratio(params.r(), u).min(loewner_ratio(params.s(), v)) {
            Threshold::Unbounded => Threshold::Unbounded,
            Threshold::Finite(c) => Threshold::Finite((4.0 * c / (r + 1.0)).sqrt()),
        }
    };

    let ls = params.s().lambda_min();
    let lv = v.lambda_max().max(0.0);
    let eps_n_v = if ls <= 0.0 {
        Threshold::Finite(0.0)
    } else if (nf - 1.0) * lv == 0.0 {
        Threshold::Unbounded
    } else {
        Threshold::Finite((2.0 * ls / (r * (nf - 1.0) * lv)).sqrt())
    };

    let lr = params.r().lambda_min();
    let lu = u.lambda_max().max(0.0);
    let k = (1.0 + nf * r) * lu + lv * r / 4.0;
    let eps_n_uv = if lr <= 0.0 {
        Threshold::Finite(0.0)
    } else if k == 0.0 {
        eps0
    } else {
        eps0.min(Threshold::Finite((2.0 * lr / k).sqrt()))
    };

    let e2 = params.eps() * params.eps();
    let r_eps = params.r() - &u.scale(e2 / 4.0 * (r + 1.0));
    let s_eps = params.s() - &v.scale(e2 / 4.0 * (r + 1.0));
    let r_eps_n = &r_eps - &u.scale(nf * e2 / 2.0);
    let s_eps_n = &s_eps - &v.scale(nf * e2 / 2.0);
    let degenerate = [eps0, eps_n_v, eps_n_uv].iter().any(|t| *t == Threshold::Finite(0.0));
    Ok(Thresholds { n, eps0, eps_n_v, eps_n_uv, r_eps, s_eps, r_eps_n, s_eps_n, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::{random_spd, random_square};
    use crate::riccati::Kappa;
    use crate::rng::rng_from_seed;
    use nalgebra::DMatrix;

    #[test]
    fn eps0_closed_form_when_varpi_zero() {
        let p = ModelParams::isotropic(3, 0.0, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        assert_eq!(thresholds(&p, 1).unwrap().eps0, Threshold::Finite(1.0));
        let p = ModelParams::isotropic(1, 0.0, 1.0, 1.0, Kappa::Zero, 0.0, 0.0).unwrap();
        assert_eq!(thresholds(&p, 3).unwrap().eps0, Threshold::Finite(2.0 / 2f64.sqrt()));
    }

    #[test]
    fn kappa_zero_has_unbounded_eps_n_v() {
        let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::Zero, 0.5, 0.0).unwrap();
        for n in 1..6 {
            assert!(thresholds(&p, n).unwrap().eps_n_v.is_unbounded());
        }
        let p = p.with_kappa(Kappa::One);
        assert!(thresholds(&p, 1).unwrap().eps_n_v.is_unbounded());
        assert!(!thresholds(&p, 2).unwrap().eps_n_v.is_unbounded());
    }

    #[test]
    fn eps_n_v_example() {
        let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        let t = thresholds(&p, 2).unwrap();
        assert!((t.eps_n_v.value() - 1.0).abs() < 1e-15);
        // Grid scan of (ε²/2)·r·(n−1)·λ₁(V) < λ_r(S).
        let mut last_ok = 0.0;
        for k in 0..=2000 {
            let e = k as f64 * 1e-3;
            if 0.5 * e * e * 2.0 * 1.0 * 1.0 <= 1.0 {
                last_ok = e;
            }
        }
        assert!((last_ok - t.eps_n_v.value()).abs() <= 1e-3);
    }

    #[test]
    fn singular_s_is_degenerate() {
        let p = ModelParams::new(
            DMatrix::zeros(2, 2),
            SymMat::identity(2),
            SymMat::from_diag(&[1.0, 0.0]),
            Kappa::One,
            0.5,
            0.0,
        )
        .unwrap();
        let t = thresholds(&p, 2).unwrap();
        assert_eq!(t.eps0, Threshold::Finite(0.0));
        assert!(t.degenerate);
    }

    #[test]
    fn shrunk_matrices_psd_below_eps0() {
        let mut rng = rng_from_seed(77);
        for _ in 0..50 {
            let r = random_spd(&mut rng, 3, 0.2);
            let s = random_spd(&mut rng, 3, 0.2);
            let a = random_square(&mut rng, 3);
            let p = ModelParams::new(a, r, s, Kappa::One, 0.3, 0.0).unwrap();
            let e0 = thresholds(&p, 1).unwrap().eps0.value();
            for frac in [0.25, 0.5, 0.9, 1.0] {
                let t = thresholds(&p.with_eps(frac * e0).unwrap(), 1).unwrap();
                assert!(t.r_eps.lambda_min() >= -1e-10 && t.s_eps.lambda_min() >= -1e-10);
            }
            let t = thresholds(&p.with_eps(1.01 * e0).unwrap(), 1).unwrap();
            assert!(t.r_eps.lambda_min() < 0.0 || t.s_eps.lambda_min() < 0.0);
        }
    }

    #[test]
    fn threshold_min_and_admits() {
        let a = Threshold::Finite(2.0);
        assert_eq!(a.min(Threshold::Unbounded), a);
        assert!(Threshold::Unbounded.admits(1e300));
        assert!(a.admits(2.0) && !a.admits(2.0 + 1e-12));
    }
}
