//! Euler–Maruyama simulation of the matrix Riccati diffusion, its
//! half-vectorized form, the inverse flow and the error process.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matcore::{
    embed_unchecked, expm, psd_sqrt_dense, sqrt_from_decomp, sqrt_psd, unvech, vech, SpectralDecomp, SymMat, VecHalf,
};
use crate::rng::{normal, rng_from_seed};

use super::flow::{check_initial, step_grid, validate_horizon};
use super::params::{sigma_unchecked, theta_dense};
use super::{Kappa, ModelParams};

/// Trace level above which a path is declared diverged.
pub const BLOWUP_GUARD: f64 = 1e8;

/// A simulated trajectory recorded at every step.
#[derive(Debug, Clone)]
pub struct RiccatiPath {
    pub grid: Vec<f64>,
    pub q: Vec<SymMat>,
    pub e: Vec<DMatrix<f64>>,
    /// Running `∫₀ᵗ Tr(A − Q_s S) ds`.
    pub logdet_integral: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
    pub floor_events: usize,
    pub steps: usize,
    pub diverged_at: Option<f64>,
}

impl RiccatiPath {
    /// Fraction of steps that needed eigenvalue flooring.
    pub fn floor_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.floor_events as f64 / self.steps as f64
        }
    }

    pub fn check(&self) -> Result<()> {
        match self.diverged_at {
            Some(time) => Err(Error::PathDiverged { time }),
            None => Ok(()),
        }
    }
}

/// How the martingale increment is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `ε[Q^{1/2} ΔW Σ^{1/2}]_sym` with an `r×r` Gaussian matrix `ΔW`.
    Matrix,
    /// `ε{Q ⊗ₛ Σ}^{1/2} ξ` with an `r̄`-dimensional Gaussian vector `ξ`.
    Vech,
}

/// One Euler–Maruyama path of `dQ = Θ(Q)dt + ε dM`, optionally carrying the
/// semigroup `E^ε_t` and the Liouville integral.
pub struct EulerStepper<'a> {
    params: &'a ModelParams,
    scheme: Scheme,
    s_dense: DMatrix<f64>,
    sqrt_r: Option<SymMat>,
    q: SymMat,
    decomp: SpectralDecomp,
    e: Option<DMatrix<f64>>,
    track_logdet: bool,
    logdet: f64,
    t0: f64,
    steps: usize,
    h_sum: f64,
    floor_events: usize,
    diverged_at: Option<f64>,
}

impl<'a> EulerStepper<'a> {
    pub fn new(params: &'a ModelParams, q0: &SymMat, track_semigroup: bool) -> Result<Self> {
        Self::with_scheme(params, q0, track_semigroup, Scheme::Matrix)
    }

    pub fn with_scheme(params: &'a ModelParams, q0: &SymMat, track_semigroup: bool, scheme: Scheme) -> Result<Self> {
        check_initial(q0, params)?;
        let decomp = q0.eig();
        let q = if decomp.lambda_min() < 0.0 { decomp.map(|l| l.max(0.0)) } else { q0.clone() };
        let sqrt_r = match params.kappa() {
            Kappa::Zero => Some(sqrt_psd(params.r())?),
            Kappa::One => None,
        };
        let n = params.dim();
        Ok(EulerStepper {
            params,
            scheme,
            s_dense: params.s().to_dense(),
            sqrt_r,
            q,
            decomp,
            e: track_semigroup.then(|| DMatrix::identity(n, n)),
            track_logdet: track_semigroup,
            logdet: 0.0,
            t0: 0.0,
            steps: 0,
            h_sum: 0.0,
            floor_events: 0,
            diverged_at: None,
        })
    }

    /// Accumulates `∫Tr(A − QS)` without propagating `E`.
    pub fn with_logdet(mut self) -> Self {
        self.track_logdet = true;
        self
    }

    pub fn q(&self) -> &SymMat {
        &self.q
    }
    pub fn e(&self) -> Option<&DMatrix<f64>> {
        self.e.as_ref()
    }
    pub fn logdet_integral(&self) -> f64 {
        self.logdet
    }
    pub fn time(&self) -> f64 {
        self.t0 + self.h_sum
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn floor_events(&self) -> usize {
        self.floor_events
    }
    pub fn diverged_at(&self) -> Option<f64> {
        self.diverged_at
    }

    fn sigma_sqrt(&self) -> SymMat {
        match &self.sqrt_r {
            Some(s) => s.clone(),
            None => {
                let sig = sigma_unchecked(&self.q, self.params);
                sqrt_from_decomp(&sig.eig()).unwrap_or_else(|_| sig.floor_psd().0)
            }
        }
    }

    /// One draw of the martingale increment `ε dM` over a step `h` at the
    /// current state (the state is not advanced).
    pub fn sample_noise<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> SymMat {
        let n = self.params.dim();
        let eps = self.params.eps();
        if eps == 0.0 {
            return SymMat::zeros(n);
        }
        let sh = h.sqrt();
        match self.scheme {
            Scheme::Matrix => {
                let w = DMatrix::from_fn(n, n, |_, _| normal(rng) * sh);
                self.matrix_noise(&w)
            }
            Scheme::Vech => {
                let sig = sigma_unchecked(&self.q, self.params);
                let root = psd_sqrt_dense(&embed_unchecked(&self.q, &sig));
                let rb = root.nrows();
                let xi = DVector::from_fn(rb, |_, _| normal(rng) * sh);
                let v = root * xi * eps;
                unvech(&VecHalf::from_coords(n, v.iter().copied().collect()).expect("r̄ coordinates"))
            }
        }
    }

    /// `ε[Q^{1/2} W Σ^{1/2}]_sym` for a given Brownian increment `W`.
    pub fn matrix_noise(&self, w: &DMatrix<f64>) -> SymMat {
        let eps = self.params.eps();
        if eps == 0.0 {
            return SymMat::zeros(self.params.dim());
        }
        let sq = sqrt_from_decomp(&self.decomp).expect("state is PSD").to_dense();
        let ssig = self.sigma_sqrt().to_dense();
        SymMat::sym_part(&(sq * w * ssig)).scale(eps)
    }

    /// Advances by `h`. Returns `false` once the path has diverged.
    pub fn step<R: Rng + ?Sized>(&mut self, h: f64, rng: &mut R) -> bool {
        if self.diverged_at.is_some() {
            return false;
        }
        let noise = self.sample_noise(h, rng);
        self.advance(h, noise)
    }

    /// Matrix-scheme step driven by a supplied `r×r` increment with
    /// `N(0, h)` entries, for coupling paths across step sizes.
    pub fn step_driven(&mut self, h: f64, w: &DMatrix<f64>) -> bool {
        if self.diverged_at.is_some() {
            return false;
        }
        let noise = self.matrix_noise(w);
        self.advance(h, noise)
    }

    fn advance(&mut self, h: f64, noise: SymMat) -> bool {
        let p = self.params;
        let drift = theta_dense(p.a(), p.r(), p.s(), &self.q);
        if let Some(e) = &mut self.e {
            let gen = p.a() - self.q.to_dense() * &self.s_dense;
            self.logdet += gen.trace() * h;
            *e = expm(&(gen * h)) * &*e;
        } else if self.track_logdet {
            self.logdet += (p.a().trace() - self.q.inner(p.s())) * h;
        }
        let mut next = self.q.clone();
        next.axpy(h, &drift);
        next += &noise;
        self.steps += 1;
        self.h_sum += h;
        if !next.is_finite() || next.trace() > BLOWUP_GUARD {
            self.diverged_at = Some(self.time());
            return false;
        }
        let d = next.eig();
        if d.lambda_min() < 0.0 {
            self.floor_events += 1;
            let mut d = d;
            d.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
            self.q = d.reconstruct();
            self.decomp = d;
        } else {
            self.q = next;
            self.decomp = d;
        }
        true
    }
}

fn warn_step_size(q0: &SymMat, dt: f64, params: &ModelParams) {
    let e = params.eps();
    if e == 0.0 {
        return;
    }
    let sig = sigma_unchecked(q0, params);
    let gauge = e * e * q0.spectral_norm() * sig.spectral_norm() * dt;
    if gauge > 0.1 {
        log::warn!("ε²‖Q0‖‖Σ(Q0)‖dt = {gauge:.3} > 0.1; consider a smaller dt");
    }
}

fn record_path(q0: &SymMat, t: f64, dt: f64, params: &ModelParams, seed: u64, scheme: Scheme) -> Result<RiccatiPath> {
    validate_horizon(t, dt)?;
    warn_step_size(q0, dt, params);
    let mut rng = rng_from_seed(seed);
    let mut st = EulerStepper::with_scheme(params, q0, true, scheme)?;
    let (n, h) = step_grid(t, dt);
    let mut path = RiccatiPath {
        grid: vec![0.0],
        q: vec![st.q().clone()],
        e: vec![st.e().unwrap().clone()],
        logdet_integral: vec![0.0],
        seed,
        dt: h,
        floor_events: 0,
        steps: 0,
        diverged_at: None,
    };
    for k in 0..n {
        if !st.step(h, &mut rng) {
            break;
        }
        path.grid.push((k + 1) as f64 * h);
        path.q.push(st.q().clone());
        path.e.push(st.e().unwrap().clone());
        path.logdet_integral.push(st.logdet_integral());
    }
    path.floor_events = st.floor_events();
    path.steps = st.steps();
    path.diverged_at = st.diverged_at();
    Ok(path)
}

/// Euler–Maruyama path of the matrix Riccati diffusion with full recording.
pub fn simulate_path(q0: &SymMat, t: f64, dt: f64, params: &ModelParams, seed: u64) -> Result<RiccatiPath> {
    record_path(q0, t, dt, params, seed, Scheme::Matrix)
}

/// Same as [`simulate_path`] but driven by the half-vectorized diffusion.
/// Agrees with it in law, not pathwise.
pub fn simulate_path_vech(q0: &SymMat, t: f64, dt: f64, params: &ModelParams, seed: u64) -> Result<RiccatiPath> {
    record_path(q0, t, dt, params, seed, Scheme::Vech)
}

/// State of one path at a list of observation times.
#[derive(Debug, Clone)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub q: Vec<SymMat>,
    pub e: Vec<DMatrix<f64>>,
    pub logdet_integral: Vec<f64>,
    pub floor_events: usize,
    pub steps: usize,
    pub diverged_at: Option<f64>,
}

/// Simulates one path and records it only at `times` (non-decreasing).
/// Each gap is split into equal steps no longer than `dt`.
pub fn simulate_path_sampled<R: Rng + ?Sized>(
    q0: &SymMat,
    times: &[f64],
    dt: f64,
    params: &ModelParams,
    track_semigroup: bool,
    scheme: Scheme,
    rng: &mut R,
) -> Result<SampledPath> {
    let horizon = times.last().copied().unwrap_or(0.0);
    validate_horizon(horizon, dt)?;
    let mut st = EulerStepper::with_scheme(params, q0, track_semigroup, scheme)?;
    let mut out = SampledPath {
        times: Vec::with_capacity(times.len()),
        q: Vec::with_capacity(times.len()),
        e: Vec::new(),
        logdet_integral: Vec::new(),
        floor_events: 0,
        steps: 0,
        diverged_at: None,
    };
    let mut t_prev = 0.0;
    'outer: for &t in times {
        if t < t_prev {
            return Err(Error::InvalidArgument("times must be non-decreasing".into()));
        }
        let (n, h) = step_grid(t - t_prev, dt);
        for _ in 0..n {
            if !st.step(h, rng) {
                break 'outer;
            }
        }
        out.times.push(t);
        out.q.push(st.q().clone());
        if let Some(e) = st.e() {
            out.e.push(e.clone());
            out.logdet_integral.push(st.logdet_integral());
        }
        t_prev = t;
    }
    out.floor_events = st.floor_events();
    out.steps = st.steps();
    out.diverged_at = st.diverged_at();
    Ok(out)
}

/// Exact drift of the inverse flow `Y = Q⁻¹`:
///
/// `−YA − AᵀY + S − YRY + (ε²/4)(r+2)·YΣ(Y⁻¹)Y + (ε²/4)·Tr(YΣ(Y⁻¹))·Y`.
pub fn inverse_drift(y: &SymMat, params: &ModelParams) -> Result<SymMat> {
    crate::error::check_dim(params.dim(), y.dim())?;
    let d = y.eig();
    if d.lambda_min() <= 0.0 {
        return Err(Error::InvalidArgument("inverse drift needs a positive definite argument".into()));
    }
    Ok(inverse_drift_from(y, &d, params).0)
}

/// Returns the drift together with `Σ_−(Y) = YΣ(Y⁻¹)Y`.
fn inverse_drift_from(y: &SymMat, d: &SpectralDecomp, params: &ModelParams) -> (SymMat, SymMat) {
    let r = params.dim() as f64;
    let e2 = params.eps() * params.eps();
    let q = d.map(|l| 1.0 / l);
    let sig = sigma_unchecked(&q, params);
    let sig_minus = y.sandwich(&sig);
    let ya = y.to_dense() * params.a();
    let mut out = SymMat::from_fn(params.dim(), |i, j| -(ya[(i, j)] + ya[(j, i)]));
    out += params.s();
    out -= &y.sandwich(params.r());
    if e2 > 0.0 {
        out.axpy(e2 / 4.0 * (r + 2.0), &sig_minus);
        out.axpy(e2 / 4.0 * y.inner(&sig), y);
    }
    (out, sig_minus)
}

/// Right-hand side of the inverse-drift inequality:
/// `−YA − AᵀY + S^ε_− − Y R^ε_− Y + (ε²/4)(Tr(YU) + Tr(VY⁻¹))·Y`.
pub fn inverse_drift_bound(y: &SymMat, params: &ModelParams) -> Result<SymMat> {
    let r = params.dim() as f64;
    let e2 = params.eps() * params.eps();
    let c = e2 / 4.0 * (r + 2.0);
    let r_minus = params.r() - &params.u().scale(c);
    let s_minus = params.s() + &params.v().scale(c);
    let yinv = y.inverse()?;
    let ya = y.to_dense() * params.a();
    let mut out = SymMat::from_fn(params.dim(), |i, j| -(ya[(i, j)] + ya[(j, i)]));
    out += &s_minus;
    out -= &y.sandwich(&r_minus);
    out.axpy(e2 / 4.0 * (y.inner(params.u()) + params.v().inner(&yinv)), y);
    Ok(out)
}

/// Simulated inverse flow.
#[derive(Debug, Clone)]
pub struct InversePath {
    pub grid: Vec<f64>,
    pub y: Vec<SymMat>,
    pub diverged_at: Option<f64>,
}

/// Steps the inverse-flow SDE `dY = Θ^ε_−(Y)dt + ε[Y^{1/2} dW Σ_−(Y)^{1/2}]_sym`.
///
/// The drift is advanced with a classical RK4 stage sequence and the
/// martingale term with an Euler increment, so at `ε = 0` the scheme is the
/// RK4 integrator of the inverse ODE.
pub struct InverseStepper<'a> {
    params: &'a ModelParams,
    y: SymMat,
    decomp: SpectralDecomp,
    t: f64,
    diverged_at: Option<f64>,
}

impl<'a> InverseStepper<'a> {
    pub fn new(params: &'a ModelParams, q0: &SymMat) -> Result<Self> {
        crate::error::check_dim(params.dim(), q0.dim())?;
        let y = q0.inverse().map_err(|_| Error::InvalidArgument("initial state must be positive definite".into()))?;
        let decomp = y.eig();
        if decomp.lambda_min() <= 0.0 {
            return Err(Error::InvalidArgument("initial state must be positive definite".into()));
        }
        Ok(InverseStepper { params, y, decomp, t: 0.0, diverged_at: None })
    }

    pub fn y(&self) -> &SymMat {
        &self.y
    }
    pub fn time(&self) -> f64 {
        self.t
    }
    pub fn diverged_at(&self) -> Option<f64> {
        self.diverged_at
    }

    fn drift_at(&self, y: &SymMat) -> Option<SymMat> {
        let d = y.eig();
        if d.lambda_min() <= 0.0 || !y.is_finite() {
            return None;
        }
        Some(inverse_drift_from(y, &d, self.params).0)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, h: f64, rng: &mut R) -> bool {
        if self.diverged_at.is_some() {
            return false;
        }
        self.t += h;
        let (k1, sig_minus) = inverse_drift_from(&self.y, &self.decomp, self.params);
        let stages = (|| {
            let k2 = self.drift_at(&(&self.y + &k1.scale(h / 2.0)))?;
            let k3 = self.drift_at(&(&self.y + &k2.scale(h / 2.0)))?;
            let k4 = self.drift_at(&(&self.y + &k3.scale(h)))?;
            Some((k2, k3, k4))
        })();
        let Some((k2, k3, k4)) = stages else {
            self.diverged_at = Some(self.t);
            return false;
        };
        let mut next = self.y.clone();
        next.axpy(h / 6.0, &k1);
        next.axpy(h / 3.0, &k2);
        next.axpy(h / 3.0, &k3);
        next.axpy(h / 6.0, &k4);
        let eps = self.params.eps();
        if eps > 0.0 {
            let n = self.params.dim();
            let sy = sqrt_from_decomp(&self.decomp).expect("SPD").to_dense();
            let ss = sig_minus.floor_psd().0;
            let ss = sqrt_psd(&ss).expect("floored").to_dense();
            let sh = h.sqrt();
            let w = DMatrix::from_fn(n, n, |_, _| normal(rng) * sh);
            next += &SymMat::sym_part(&(sy * w * ss)).scale(eps);
        }
        let d = next.eig();
        if d.lambda_min() <= 0.0 || !next.is_finite() || next.trace() > BLOWUP_GUARD {
            self.diverged_at = Some(self.t);
            return false;
        }
        self.y = next;
        self.decomp = d;
        true
    }
}

/// Inverse-flow path started at `Q0⁻¹`.
pub fn simulate_inverse_path(q0: &SymMat, t: f64, dt: f64, params: &ModelParams, seed: u64) -> Result<InversePath> {
    validate_horizon(t, dt)?;
    let mut rng = rng_from_seed(seed);
    let mut st = InverseStepper::new(params, q0)?;
    let (n, h) = step_grid(t, dt);
    let mut path = InversePath { grid: vec![0.0], y: vec![st.y().clone()], diverged_at: None };
    for k in 0..n {
        if !st.step(h, &mut rng) {
            break;
        }
        path.grid.push((k + 1) as f64 * h);
        path.y.push(st.y().clone());
    }
    path.diverged_at = st.diverged_at();
    Ok(path)
}

/// `ε̄ = ε/√(4+ε²)`.
pub fn eps_bar(eps: f64) -> f64 {
    eps / (4.0 + eps * eps).sqrt()
}

/// Diffusion matrix `Σ_{1,ϖ}(Q) + ε̄² Σ_{κ,ϖ}(Q)` of the error process.
pub fn error_diffusion(q: &SymMat, params: &ModelParams) -> SymMat {
    let one = params.with_kappa(Kappa::One);
    let eb = eps_bar(params.eps());
    sigma_unchecked(q, &one) + sigma_unchecked(q, params).scale(eb * eb)
}

/// Joint simulation of `Q_t` and the error process
/// `dX = ((A − ϖS) − QS)X dt + Σ^ε̄(Q)^{1/2} dW`, recorded at `times`.
pub fn simulate_error_process<R: Rng + ?Sized>(
    q0: &SymMat,
    x0: &DVector<f64>,
    times: &[f64],
    dt: f64,
    params: &ModelParams,
    rng_q: &mut R,
    rng_x: &mut R,
) -> Result<Vec<(SymMat, DVector<f64>)>> {
    crate::error::check_dim(params.dim(), x0.len())?;
    let horizon = times.last().copied().unwrap_or(0.0);
    validate_horizon(horizon, dt)?;
    let n = params.dim();
    let s = params.s().to_dense();
    let a_shift = params.a() - &s * params.varpi();
    let mut st = EulerStepper::new(params, q0, false)?;
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    for &t in times {
        if t < t_prev {
            return Err(Error::InvalidArgument("times must be non-decreasing".into()));
        }
        let (steps, h) = step_grid(t - t_prev, dt);
        for _ in 0..steps {
            let q = st.q().clone();
            let gen = &a_shift - q.to_dense() * &s;
            let root = sqrt_psd(&error_diffusion(&q, params))?.to_dense();
            let sh = h.sqrt();
            let dw = DVector::from_fn(n, |_, _| normal(rng_x) * sh);
            x = &x + gen * &x * h + root * dw;
            if !st.step(h, rng_q) {
                return Err(Error::PathDiverged { time: st.time() });
            }
        }
        out.push((st.q().clone(), x.clone()));
        t_prev = t;
    }
    Ok(out)
}

/// Half-vectorized state of a path sample, for distributional comparisons.
pub fn vech_state(q: &SymMat) -> Vec<f64> {
    vech(q).coords()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::{random_spd, random_square};
    use crate::riccati::{det_flow_endpoint, integrate_det_flow, integrate_det_flow_euler};
    use crate::rng::rng_from_seed;

    fn iso(eps: f64) -> ModelParams {
        ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, eps).unwrap()
    }

    #[test]
    fn zero_noise_matches_euler_flow() {
        let p = iso(0.0);
        let q0 = SymMat::from_diag(&[0.2, 3.0]);
        let path = simulate_path(&q0, 1.0, 1e-2, &p, 5).unwrap();
        let mut q = q0.clone();
        for k in 0..100 {
            let th = theta_dense(p.a(), p.r(), p.s(), &q);
            q.axpy(1e-2, &th);
            assert!(path.q[k + 1].max_abs_diff(&q) <= 1e-14);
        }
        let det = integrate_det_flow_euler(&q0, 1.0, 1e-2, &p.with_eps(0.3).unwrap()).unwrap();
        for (a, b) in det.phi.iter().zip(&path.q) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn liouville_identity_pathwise() {
        let p = iso(0.3);
        let path = simulate_path(&SymMat::identity(2), 2.0, 2.5e-4, &p, 11).unwrap();
        assert!(path.diverged_at.is_none());
        for (e, l) in path.e.iter().zip(&path.logdet_integral) {
            let ld = e.determinant().ln();
            assert!((ld - l).abs() <= 1e-6 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn paths_stay_psd_and_reproducible() {
        let p = iso(0.5);
        let a = simulate_path(&SymMat::from_diag(&[0.1, 2.0]), 1.0, 1e-3, &p, 3).unwrap();
        let b = simulate_path(&SymMat::from_diag(&[0.1, 2.0]), 1.0, 1e-3, &p, 3).unwrap();
        assert!(a.q.iter().all(|q| q.lambda_min() >= 0.0));
        assert_eq!(a.q, b.q);
        let c = simulate_path(&SymMat::from_diag(&[0.1, 2.0]), 1.0, 1e-3, &p, 4).unwrap();
        assert_ne!(a.q.last(), c.q.last());
    }

    #[test]
    fn scalar_schemes_coincide() {
        let p = ModelParams::scalar(0.5, 1.0, 1.0, Kappa::One, 0.2, 0.4).unwrap();
        let a = simulate_path(&SymMat::from_diag(&[1.0]), 1.0, 1e-3, &p, 8).unwrap();
        let b = simulate_path_vech(&SymMat::from_diag(&[1.0]), 1.0, 1e-3, &p, 8).unwrap();
        for (x, y) in a.q.iter().zip(&b.q) {
            assert!((x.get(0, 0) - y.get(0, 0)).abs() <= 1e-12 * (1.0 + x.get(0, 0)));
        }
    }

    #[test]
    fn vech_zero_noise_is_euler() {
        let p = iso(0.0);
        let a = simulate_path(&SymMat::identity(2), 0.5, 1e-2, &p, 1).unwrap();
        let b = simulate_path_vech(&SymMat::identity(2), 0.5, 1e-2, &p, 1).unwrap();
        assert_eq!(a.q, b.q);
    }

    #[test]
    fn blowup_guard_trips() {
        let p = ModelParams::isotropic(2, 2.0, 1.0, 0.0, Kappa::Zero, 0.0, 0.1).unwrap();
        assert!(!p.is_detectable());
        let path = simulate_path(&SymMat::identity(2), 20.0, 1e-2, &p, 2).unwrap();
        assert!(path.diverged_at.is_some());
        assert!(matches!(path.check(), Err(Error::PathDiverged { .. })));
    }

    #[test]
    fn inverse_path_at_zero_noise_inverts_det_flow() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.4, -0.2, -0.5]);
        let p = ModelParams::new(a, SymMat::identity(2), SymMat::from_diag(&[1.0, 0.5]), Kappa::One, 0.0, 0.0).unwrap();
        let q0 = SymMat::from_row_slice(2, &[1.0, 0.2, 0.2, 0.5]).unwrap();
        let inv = simulate_inverse_path(&q0, 2.0, 1e-3, &p, 0).unwrap();
        let det = integrate_det_flow(&q0, 2.0, 1e-3, &p).unwrap();
        for (y, q) in inv.y.iter().zip(&det.phi) {
            let qi = q.inverse().unwrap();
            assert!(y.max_abs_diff(&qi) <= 1e-8, "{}", y.max_abs_diff(&qi));
        }
    }

    #[test]
    fn inverse_drift_inequality_random() {
        let mut rng = rng_from_seed(12);
        for _ in 0..200 {
            let a = random_square(&mut rng, 3);
            let r = random_spd(&mut rng, 3, 0.1);
            let s = random_spd(&mut rng, 3, 0.1);
            let p = ModelParams::new(a, r, s, Kappa::One, 0.4, 0.3).unwrap();
            let y = random_spd(&mut rng, 3, 0.05);
            let lhs = inverse_drift(&y, &p).unwrap();
            let rhs = inverse_drift_bound(&y, &p).unwrap();
            assert!(lhs.loewner_le(&rhs, 1e-10 * (1.0 + rhs.frob_norm())));
        }
    }

    #[test]
    fn error_process_at_zero_noise_tracks_riccati_covariance() {
        // With ε = ϖ = 0 the error covariance solves the deterministic flow.
        let p = ModelParams::scalar(-0.5, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        let q0 = SymMat::from_diag(&[0.5]);
        let n = 4000;
        let mut acc = 0.0;
        for i in 0..n {
            let mut rq = rng_from_seed(1);
            let mut rx = crate::rng::path_rng(9, i, crate::rng::Purpose::ErrorProcess);
            let x0 = DVector::from_element(1, normal(&mut rx) * 0.5f64.sqrt());
            let out = simulate_error_process(&q0, &x0, &[1.0], 1e-2, &p, &mut rq, &mut rx).unwrap();
            acc += out[0].1[0].powi(2);
        }
        let var = acc / n as f64;
        let (pt, _) = det_flow_endpoint(&q0, 1.0, 1e-3, &p).unwrap();
        let target = pt.get(0, 0);
        let se = target * (2.0 / n as f64).sqrt();
        assert!((var - target).abs() <= 4.0 * se, "var {var} target {target}");
    }
}
