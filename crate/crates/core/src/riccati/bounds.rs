use crate::error::{Error, Result};
use crate::matcore::{log_norm, SymMat};

use super::ModelParams;

/// Time-`t` value of the scalar comparison flow and its stationary cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBound {
    pub at_t: f64,
    pub stationary_cap: f64,
}

/// Coefficients `(𝔞, 𝔯, 𝔰)` of the scalar flow `p' = 2𝔞p + 𝔯 − 𝔰p²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRiccati {
    pub a: f64,
    pub r: f64,
    pub s: f64,
}

impl ScalarRiccati {
    fn disc(&self) -> f64 {
        (self.a * self.a + self.r * self.s).max(0.0).sqrt()
    }

    /// Positive root of `2𝔞p + 𝔯 − 𝔰p² = 0` (needs `𝔰 > 0`).
    pub fn fixed_point(&self) -> f64 {
        (self.a + self.disc()) / self.s
    }

    /// Closed-form solution at time `t` from `p0`.
    pub fn solve(&self, p0: f64, t: f64) -> f64 {
        let d = self.disc();
        let pp = self.fixed_point();
        let x0 = p0 - pp;
        let x = if d * t < 1e-12 {
            x0 / (1.0 + self.s * x0 * t)
        } else {
            let decay = (-2.0 * d * t).exp();
            x0 * decay / (1.0 + self.s * x0 * (1.0 - decay) / (2.0 * d))
        };
        pp + x
    }
}

/// Forward comparison coefficients at order `n`, evaluated at the model's ε.
pub fn forward_coefficients(params: &ModelParams, n: usize) -> Result<ScalarRiccati> {
    if n == 0 {
        return Err(Error::InvalidArgument("moment order n must be ≥ 1".into()));
    }
    let r = params.dim() as f64;
    let e2 = params.eps() * params.eps();
    let m = (n - 1) as f64;
    let a = log_norm(params.a())?;
    let rr = params.r().trace() + 0.5 * e2 * m * params.u().lambda_max().max(0.0);
    let s = params.s().lambda_min() / r - 0.5 * e2 * m * params.v().lambda_max().max(0.0);
    if s <= 0.0 {
        return Err(Error::ThresholdExceeded(format!("𝔰_n = {s:e} ≤ 0 at n = {n}, ε = {}", params.eps())));
    }
    Ok(ScalarRiccati { a, r: rr, s })
}

/// Bound `𝔭_{t,n}` on `E[Tr(Q_t)^n]^{1/n}` with its stationary cap
/// `𝔭_{∞,n} ∨ Tr(Q0)`.
pub fn trace_moment_bound(params: &ModelParams, n: usize, t: f64, q0: &SymMat) -> Result<TraceBound> {
    crate::error::check_dim(params.dim(), q0.dim())?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be ≥ 0, got {t}")));
    }
    let c = forward_coefficients(params, n)?;
    let tr0 = q0.trace();
    Ok(TraceBound { at_t: c.solve(tr0, t), stationary_cap: c.fixed_point().max(tr0) })
}

/// Uniform bound on `E[Tr(Q_t⁻¹)^n]^{1/n}`.
pub fn inverse_trace_bound(params: &ModelParams, n: usize, q0: &SymMat) -> Result<f64> {
    crate::error::check_dim(params.dim(), q0.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument("moment order n must be ≥ 1".into()));
    }
    let inv = q0
        .inverse()
        .map_err(|_| Error::InvalidArgument("initial state must be positive definite".into()))?;
    let r = params.dim() as f64;
    let nf = n as f64;
    let e2 = params.eps() * params.eps();
    let lu = params.u().lambda_max().max(0.0);
    let lv = params.v().lambda_max().max(0.0);
    let a_sym = SymMat::sym_part(params.a());
    let a = -a_sym.lambda_min();
    let s = params.r().lambda_min() / r - 0.5 * e2 * ((nf + 1.0 / r) * lu + lv / 4.0);
    if s <= 0.0 {
        return Err(Error::ThresholdExceeded(format!("inverse 𝔰_n = {s:e} ≤ 0 at n = {n}, ε = {}", params.eps())));
    }
    let tr0 = q0.trace();
    let forward_cap = if lv > 0.0 && e2 > 0.0 {
        forward_coefficients(params, 2 * n)?.fixed_point().max(tr0).powi(2)
    } else {
        0.0
    };
    let rr = params.s().trace()
        + 0.5 * e2 * ((1.0 + r / 2.0) * params.v().trace() + (nf - 1.0) * lv + lv / 4.0 * forward_cap);
    let c = ScalarRiccati { a, r: rr, s };
    Ok(c.fixed_point().max(inv.trace()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{det_flow_endpoint, Kappa};

    #[test]
    fn scalar_tanh_case() {
        let p = ModelParams::scalar(1.0, 1.0, 1.0, Kappa::Zero, 0.0, 0.0).unwrap();
        let q0 = SymMat::zeros(1);
        let b = trace_moment_bound(&p, 1, 50.0, &q0).unwrap();
        assert!((b.stationary_cap - (1.0 + 2f64.sqrt())).abs() < 1e-14);
        // p' = 2p + 1 − p², p(0) = 0 ⟹ p(t) = 1 + √2·tanh(√2 t − atanh(1/√2)).
        let s2 = 2f64.sqrt();
        for t in [0.1, 0.5, 1.0, 3.0] {
            let exact = 1.0 + s2 * (s2 * t - (1.0 / s2).atanh()).tanh();
            let b = trace_moment_bound(&p, 1, t, &q0).unwrap();
            assert!((b.at_t - exact).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn closed_form_matches_rk4() {
        let c = ScalarRiccati { a: -0.3, r: 2.0, s: 0.7 };
        let mut p = 5.0;
        let h = 1e-4;
        let f = |p: f64| 2.0 * c.a * p + c.r - c.s * p * p;
        for _ in 0..20000 {
            let k1 = f(p);
            let k2 = f(p + h / 2.0 * k1);
            let k3 = f(p + h / 2.0 * k2);
            let k4 = f(p + h * k3);
            p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((c.solve(5.0, 2.0) - p).abs() < 1e-10);
    }

    #[test]
    fn kappa_zero_s_is_noise_free() {
        let p = ModelParams::isotropic(2, 0.1, 1.0, 2.0, Kappa::Zero, 0.3, 0.0).unwrap();
        let base = forward_coefficients(&p, 3).unwrap().s;
        for e in [0.1, 0.5, 0.9] {
            assert_eq!(forward_coefficients(&p.with_eps(e).unwrap(), 3).unwrap().s, base);
        }
    }

    #[test]
    fn threshold_exceeded() {
        let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, 1.5).unwrap();
        assert!(matches!(forward_coefficients(&p, 2), Err(Error::ThresholdExceeded(_))));
        assert!(forward_coefficients(&p, 1).is_ok());
    }

    #[test]
    fn dominates_deterministic_trace() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[0.2, 1.0, -0.5, -0.4]);
        let p = ModelParams::new(a, SymMat::identity(2), SymMat::from_diag(&[1.0, 2.0]), Kappa::One, 0.0, 0.0).unwrap();
        let q0 = SymMat::from_diag(&[3.0, 0.1]);
        for t in [0.2, 1.0, 4.0] {
            let (phi, _) = det_flow_endpoint(&q0, t, 1e-3, &p).unwrap();
            let b = trace_moment_bound(&p, 1, t, &q0).unwrap();
            assert!(phi.trace() <= b.at_t + 1e-9);
            assert!(b.at_t <= b.stationary_cap + 1e-12);
        }
        let ib = inverse_trace_bound(&p, 1, &q0).unwrap();
        let (phi, _) = det_flow_endpoint(&q0, 5.0, 1e-3, &p).unwrap();
        assert!(phi.inverse().unwrap().trace() <= ib);
    }
}
