//! Deterministic Riccati flow `φ_t(Q)` and its exponential semigroup.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::matcore::{tol_psd, SymMat};

use super::params::theta_dense;
use super::ModelParams;

/// Sampled deterministic trajectory: `phi[k] = φ_{t_k}(Q0)` and
/// `e[k] = E_{0,t_k}(Q0)`.
#[derive(Debug, Clone)]
pub struct DetFlow {
    pub times: Vec<f64>,
    pub phi: Vec<SymMat>,
    pub e: Vec<DMatrix<f64>>,
}

impl DetFlow {
    pub fn final_phi(&self) -> &SymMat {
        self.phi.last().expect("flow has at least the initial point")
    }

    pub fn final_e(&self) -> &DMatrix<f64> {
        self.e.last().expect("flow has at least the initial point")
    }
}

/// Number of steps and the adjusted step so that `n·h = t` exactly.
pub(crate) fn step_grid(t: f64, dt: f64) -> (usize, f64) {
    if t == 0.0 {
        return (0, dt);
    }
    let n = (t / dt - 1e-9).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

pub(crate) fn validate_horizon(t: f64, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("T must be non-negative, got {t}")));
    }
    Ok(())
}

pub(crate) fn check_initial(q0: &SymMat, params: &ModelParams) -> Result<()> {
    check_dim(params.dim(), q0.dim())?;
    let lmin = q0.lambda_min();
    let tol = tol_psd(q0);
    if lmin < -tol {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lmin, tolerance: tol });
    }
    Ok(())
}

fn theta(params: &ModelParams, p: &SymMat) -> SymMat {
    theta_dense(params.a(), params.r(), params.s(), p)
}

pub(crate) fn rk4_p_step(params: &ModelParams, p: &SymMat, h: f64) -> SymMat {
    let k1 = theta(params, p);
    let k2 = theta(params, &(p + &k1.scale(h / 2.0)));
    let k3 = theta(params, &(p + &k2.scale(h / 2.0)));
    let k4 = theta(params, &(p + &k3.scale(h)));
    let mut out = p.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    out
}

fn rk4_pe_step(params: &ModelParams, s: &DMatrix<f64>, p: &SymMat, e: &DMatrix<f64>, h: f64) -> (SymMat, DMatrix<f64>) {
    let gen = |q: &SymMat| params.a() - q.to_dense() * s;
    let k1p = theta(params, p);
    let k1e = gen(p) * e;
    let p2 = p + &k1p.scale(h / 2.0);
    let e2 = e + &k1e * (h / 2.0);
    let k2p = theta(params, &p2);
    let k2e = gen(&p2) * e2;
    let p3 = p + &k2p.scale(h / 2.0);
    let e3 = e + &k2e * (h / 2.0);
    let k3p = theta(params, &p3);
    let k3e = gen(&p3) * e3;
    let p4 = p + &k3p.scale(h);
    let e4 = e + &k3e * h;
    let k4p = theta(params, &p4);
    let k4e = gen(&p4) * e4;
    let mut pn = p.clone();
    pn.axpy(h / 6.0, &k1p);
    pn.axpy(h / 3.0, &k2p);
    pn.axpy(h / 3.0, &k3p);
    pn.axpy(h / 6.0, &k4p);
    let en = e + (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (h / 6.0);
    (pn, en)
}

fn run_rk4(q0: &SymMat, t: f64, dt: f64, params: &ModelParams, record: bool) -> Result<DetFlow> {
    validate_horizon(t, dt)?;
    check_initial(q0, params)?;
    let (n, h) = step_grid(t, dt);
    let s = params.s().to_dense();
    let mut p = q0.clone();
    let mut e = DMatrix::identity(params.dim(), params.dim());
    let mut flow = DetFlow { times: vec![0.0], phi: vec![p.clone()], e: vec![e.clone()] };
    for k in 0..n {
        let (pn, en) = rk4_pe_step(params, &s, &p, &e, h);
        let tk = (k + 1) as f64 * h;
        let lmin = pn.lambda_min();
        if !pn.is_finite() || lmin < -tol_psd(&pn) {
            return Err(Error::StepSizeTooLarge { min_eigenvalue: lmin, time: tk });
        }
        p = pn;
        e = en;
        if record || k + 1 == n {
            flow.times.push(tk);
            flow.phi.push(p.clone());
            flow.e.push(e.clone());
        }
    }
    if !record && n > 0 {
        // Keep just the endpoints.
        let last = flow.phi.len() - 1;
        flow.times = vec![0.0, flow.times[last]];
        flow.phi = vec![q0.clone(), flow.phi[last].clone()];
        flow.e = vec![DMatrix::identity(params.dim(), params.dim()), flow.e[last].clone()];
    }
    Ok(flow)
}

/// RK4 on the coupled system `Ṗ = Θ(P)`, `Ė = (A − PS)E`, recording every step.
pub fn integrate_det_flow(q0: &SymMat, t: f64, dt: f64, params: &ModelParams) -> Result<DetFlow> {
    run_rk4(q0, t, dt, params, true)
}

/// `(φ_t(Q0), E_{0,t}(Q0))` without storing intermediate steps.
pub fn det_flow_endpoint(q0: &SymMat, t: f64, dt: f64, params: &ModelParams) -> Result<(SymMat, DMatrix<f64>)> {
    let f = run_rk4(q0, t, dt, params, false)?;
    Ok((f.final_phi().clone(), f.final_e().clone()))
}

/// `φ_t(Q0)` at each of the increasing `times`.
pub fn det_flow_at(q0: &SymMat, times: &[f64], dt: f64, params: &ModelParams) -> Result<Vec<SymMat>> {
    let mut out = Vec::with_capacity(times.len());
    let mut p = q0.clone();
    let mut t_prev = 0.0;
    for &t in times {
        if t < t_prev {
            return Err(Error::InvalidArgument("times must be non-decreasing".into()));
        }
        p = det_flow_endpoint(&p, t - t_prev, dt, params)?.0;
        out.push(p.clone());
        t_prev = t;
    }
    Ok(out)
}

/// Explicit Euler trajectory with the same stepper as the stochastic
/// simulation at `ε = 0`.
pub fn integrate_det_flow_euler(q0: &SymMat, t: f64, dt: f64, params: &ModelParams) -> Result<DetFlow> {
    let p0 = params.with_eps(0.0)?;
    let path = super::sde::simulate_path(q0, t, dt, &p0, 0)?;
    Ok(DetFlow { times: path.grid, phi: path.q, e: path.e })
}

/// `φ_t(Q2) + E_{s,t}(Q2)·[φ_s(Q1) − φ_s(Q2)]·E_{s,t}(Q2)ᵀ`, which dominates
/// `φ_t(Q1)` in the Loewner order.
pub fn comparison_upper_bound(
    phi_s_q1: &SymMat,
    q2: &SymMat,
    s: f64,
    t: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<SymMat> {
    if s > t {
        return Err(Error::InvalidArgument(format!("need s ≤ t, got s = {s}, t = {t}")));
    }
    check_dim(params.dim(), phi_s_q1.dim())?;
    let (phi_s_q2, _) = det_flow_endpoint(q2, s, dt, params)?;
    let (phi_t_q2, e_st) = det_flow_endpoint(&phi_s_q2, t - s, dt, params)?;
    let delta = phi_s_q1 - &phi_s_q2;
    Ok(phi_t_q2 + delta.congruence(&e_st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::{random_spd, random_square};
    use crate::riccati::{solve_fixed_point, Kappa};
    use crate::rng::rng_from_seed;

    #[test]
    fn initial_condition() {
        let p = ModelParams::isotropic(2, 0.1, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        let q0 = SymMat::from_diag(&[0.3, 2.0]);
        let f = integrate_det_flow(&q0, 0.0, 0.01, &p).unwrap();
        assert_eq!(f.phi, vec![q0]);
        assert_eq!(f.e[0], DMatrix::identity(2, 2));
    }

    #[test]
    fn tanh_closed_form() {
        let p = ModelParams::scalar(0.0, 1.0, 1.0, Kappa::Zero, 0.0, 0.0).unwrap();
        let f = integrate_det_flow(&SymMat::zeros(1), 5.0, 1e-3, &p).unwrap();
        let worst = f
            .times
            .iter()
            .zip(&f.phi)
            .map(|(t, q)| (q.get(0, 0) - t.tanh()).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-8, "max error {worst}");
    }

    #[test]
    fn det_of_semigroup_at_fixed_point() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -0.3, -0.2]);
        let p = ModelParams::new(a, SymMat::identity(2), SymMat::from_diag(&[1.0, 2.0]), Kappa::One, 0.0, 0.0).unwrap();
        let pinf = solve_fixed_point(&p).unwrap();
        let tr = (p.a() - pinf.to_dense() * p.s().to_dense()).trace();
        let f = integrate_det_flow(&pinf, 3.0, 1e-3, &p).unwrap();
        for (t, e) in f.times.iter().zip(&f.e).step_by(500) {
            let expected = (t * tr).exp();
            assert!((e.determinant() - expected).abs() <= 1e-8 * expected.max(1e-300) + 1e-12);
        }
    }

    #[test]
    fn converges_to_fixed_point() {
        let p = ModelParams::isotropic(2, 1.0, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        let (q, _) = det_flow_endpoint(&SymMat::zeros(2), 20.0, 1e-3, &p).unwrap();
        let pinf = solve_fixed_point(&p).unwrap();
        assert!((q - pinf).frob_norm() < 1e-10);
    }

    #[test]
    fn euler_variant_is_first_order() {
        let p = ModelParams::scalar(0.0, 1.0, 1.0, Kappa::Zero, 0.0, 0.0).unwrap();
        let err = |dt: f64| {
            let f = integrate_det_flow_euler(&SymMat::zeros(1), 1.0, dt, &p).unwrap();
            (f.final_phi().get(0, 0) - 1f64.tanh()).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn negative_initial_is_rejected() {
        let p = ModelParams::scalar(0.0, 1.0, 1.0, Kappa::Zero, 0.0, 0.0).unwrap();
        assert!(integrate_det_flow(&SymMat::from_diag(&[-1.0]), 1.0, 1e-3, &p).is_err());
        assert!(integrate_det_flow(&SymMat::zeros(1), 1.0, 0.0, &p).is_err());
    }

    #[test]
    fn step_too_large_is_reported() {
        let p = ModelParams::scalar(0.0, 0.0, 1.0, Kappa::Zero, 0.0, 0.0).unwrap();
        let r = integrate_det_flow(&SymMat::from_diag(&[50.0]), 1.0, 0.5, &p);
        assert!(matches!(r, Err(Error::StepSizeTooLarge { .. })));
    }

    #[test]
    fn comparison_bound_exact_for_equal_start() {
        let p = ModelParams::isotropic(2, 0.2, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        let q = SymMat::from_diag(&[0.5, 1.5]);
        let b = comparison_upper_bound(&q, &q, 0.0, 1.5, 1e-3, &p).unwrap();
        let (phi, _) = det_flow_endpoint(&q, 1.5, 1e-3, &p).unwrap();
        assert_eq!(b, phi);
    }

    #[test]
    fn comparison_and_monotonicity_random_pairs() {
        let mut rng = rng_from_seed(31);
        for _ in 0..50 {
            let a = random_square(&mut rng, 3);
            let r = random_spd(&mut rng, 3, 0.1);
            let s = random_spd(&mut rng, 3, 0.1);
            let p = ModelParams::new(a, r, s, Kappa::One, 0.0, 0.0).unwrap();
            let q1 = random_spd(&mut rng, 3, 0.0);
            let q2 = &q1 + &random_spd(&mut rng, 3, 0.0);
            let (phi1, _) = det_flow_endpoint(&q1, 1.0, 1e-3, &p).unwrap();
            let (phi2, _) = det_flow_endpoint(&q2, 1.0, 1e-3, &p).unwrap();
            assert!(phi1.loewner_le(&phi2, 1e-9));
            let b = comparison_upper_bound(&q1, &q2, 0.0, 1.0, 1e-3, &p).unwrap();
            assert!(phi1.loewner_le(&b, 1e-9));
        }
    }
}
