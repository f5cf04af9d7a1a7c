use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matcore::SymMat;
use crate::riccati::{
    simulate_path_sampled, step_grid, thresholds, EulerStepper, InverseStepper, Kappa, ModelParams, Scheme,
};
use crate::rng::{path_rng, rng_from_seed, PathRng, Purpose};

use super::stats::{
    batch_means, fit_line, log_sum_exp, loewner_below, par_map, quantile, wasserstein1, LoewnerCheck,
    DEFAULT_BATCHES,
};

/// Matrix functional used inside `|||·|||ₙ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    Spectral,
    Frobenius,
    Trace,
    /// `‖P‖₂ + ‖P⁻¹‖₂`.
    Lambda,
}

impl Functional {
    pub fn eval(self, q: &SymMat) -> f64 {
        match self {
            Functional::Spectral => q.spectral_norm(),
            Functional::Frobenius => q.frob_norm(),
            Functional::Trace => q.trace(),
            Functional::Lambda => lambda_function(q),
        }
    }
}

/// `Λ(P) = ‖P‖₂ + ‖P⁻¹‖₂`; `+∞` for singular `P`.
pub fn lambda_function(p: &SymMat) -> f64 {
    let l = p.eigenvalues();
    let lmin = l.last().copied().unwrap_or(0.0);
    if lmin <= 0.0 {
        f64::INFINITY
    } else {
        l[0].abs().max(lmin.abs()) + 1.0 / lmin
    }
}

/// `|||X|||ₙ = E[‖X‖ⁿ]^{1/n}` with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub order_n: u32,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub batch_count: usize,
    pub diverged: usize,
}

impl MomentEstimate {
    pub fn diverged_fraction(&self) -> f64 {
        self.diverged as f64 / (self.n_paths + self.diverged).max(1) as f64
    }

    /// At most 1% of paths diverged.
    pub fn reliable(&self) -> bool {
        self.diverged_fraction() <= 0.01
    }
}

/// Moment norm from per-path values `‖X_i‖` (diverged paths already removed).
pub fn moment_from_values(values: &[f64], n: u32, diverged: usize) -> Result<MomentEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("moment order must be ≥ 1".into()));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("every path diverged".into()));
    }
    let powered: Vec<f64> = values.iter().map(|v| v.powi(n as i32)).collect();
    let s = batch_means(&powered, DEFAULT_BATCHES);
    let nf = n as f64;
    let value = s.mean.powf(1.0 / nf);
    let stderr = if s.mean > 0.0 { s.stderr * value / (nf * s.mean) } else { 0.0 };
    Ok(MomentEstimate { order_n: n, value, stderr, n_paths: values.len(), batch_count: s.batches, diverged })
}

/// Estimates `|||F(X_t)|||ₙ` over `n_paths` independent draws of `sampler`.
/// A sampler returning `PathDiverged` counts as a diverged path.
pub fn estimate_moment_norm<F>(
    sampler: F,
    functional: Functional,
    n: u32,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MomentEstimate>
where
    F: Fn(f64, &mut PathRng) -> Result<SymMat> + Sync + Send,
{
    if n_paths < 100 {
        return Err(Error::InvalidArgument(format!("n_paths must be ≥ 100, got {n_paths}")));
    }
    let draws = par_map(n_paths, |i| {
        let mut rng = path_rng(seed, i as u64, Purpose::MatrixPath);
        sampler(t, &mut rng)
    });
    let mut values = Vec::with_capacity(n_paths);
    let mut diverged = 0;
    for d in draws {
        match d {
            Ok(x) => values.push(functional.eval(&x)),
            Err(Error::PathDiverged { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
    }
    let est = moment_from_values(&values, n, diverged)?;
    if !est.reliable() {
        log::warn!("{:.1}% of paths diverged; estimate unreliable", 100.0 * est.diverged_fraction());
    }
    Ok(est)
}

/// Sampler of `Q_t` from the matrix Euler scheme.
pub fn forward_sampler<'a>(
    params: &'a ModelParams,
    q0: &'a SymMat,
    dt: f64,
) -> impl Fn(f64, &mut PathRng) -> Result<SymMat> + Sync + Send + 'a {
    move |t, rng| {
        let p = simulate_path_sampled(q0, &[t], dt, params, false, Scheme::Matrix, rng)?;
        if let Some(time) = p.diverged_at {
            return Err(Error::PathDiverged { time });
        }
        Ok(p.q.into_iter().next().expect("one sample"))
    }
}

/// Sampler of the inverse flow `Q_t⁻¹` from its own SDE.
pub fn inverse_sampler<'a>(
    params: &'a ModelParams,
    q0: &'a SymMat,
    dt: f64,
) -> impl Fn(f64, &mut PathRng) -> Result<SymMat> + Sync + Send + 'a {
    move |t, rng| {
        let mut st = InverseStepper::new(params, q0)?;
        let (n, h) = step_grid(t, dt);
        for _ in 0..n {
            if !st.step(h, rng) {
                return Err(Error::PathDiverged { time: st.time() });
            }
        }
        Ok(st.y().clone())
    }
}

/// Per-path states at common observation times.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub times: Vec<f64>,
    /// `states[i][k]`: path `i` (non-diverged only) at `times[k]`.
    pub states: Vec<Vec<SymMat>>,
    /// `∫₀^{t_k} Tr(A − QS)` per path and time, when requested.
    pub logdets: Vec<Vec<f64>>,
    pub diverged: usize,
    pub floor_rate: f64,
    /// Step size actually used after automatic halving.
    pub dt: f64,
}

impl PathBatch {
    pub fn at(&self, k: usize) -> Vec<SymMat> {
        self.states.iter().map(|s| s[k].clone()).collect()
    }
}

/// Options for [`simulate_batch`].
#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub purpose: Purpose,
    pub track_logdet: bool,
    /// Halve `dt` (up to 3 times) while more than 1% of steps are floored.
    pub auto_halve: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { purpose: Purpose::MatrixPath, track_logdet: false, auto_halve: true }
    }
}

/// Simulates `n_paths` matrix paths recorded at `times`. Path `i` always
/// uses the stream `(seed, i, purpose)`, so calls that differ only in ε
/// share their Brownian increments.
pub fn simulate_batch(
    params: &ModelParams,
    q0: &SymMat,
    times: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
    opts: BatchOptions,
) -> Result<PathBatch> {
    let mut dt = dt;
    let mut halvings = 0;
    loop {
        let runs = par_map(n_paths, |i| -> Result<_> {
            let mut rng = path_rng(seed, i as u64, opts.purpose);
            let mut st = EulerStepper::new(params, q0, false)?;
            if opts.track_logdet {
                st = st.with_logdet();
            }
            let mut states = Vec::with_capacity(times.len());
            let mut logdets = Vec::new();
            let mut t_prev = 0.0;
            for &t in times {
                let (n, h) = step_grid(t - t_prev, dt);
                for _ in 0..n {
                    if !st.step(h, &mut rng) {
                        return Ok((None, st.floor_events(), st.steps()));
                    }
                }
                states.push(st.q().clone());
                if opts.track_logdet {
                    logdets.push(st.logdet_integral());
                }
                t_prev = t;
            }
            Ok((Some((states, logdets)), st.floor_events(), st.steps()))
        });
        let mut batch = PathBatch {
            times: times.to_vec(),
            states: Vec::with_capacity(n_paths),
            logdets: Vec::new(),
            diverged: 0,
            floor_rate: 0.0,
            dt,
        };
        let (mut floors, mut steps) = (0usize, 0usize);
        for r in runs {
            let (res, f, s) = r?;
            floors += f;
            steps += s;
            match res {
                Some((q, l)) => {
                    batch.states.push(q);
                    if opts.track_logdet {
                        batch.logdets.push(l);
                    }
                }
                None => batch.diverged += 1,
            }
        }
        batch.floor_rate = if steps == 0 { 0.0 } else { floors as f64 / steps as f64 };
        if opts.auto_halve && batch.floor_rate > 0.01 && halvings < 3 {
            log::warn!("flooring rate {:.2}% at dt = {dt}; halving", 100.0 * batch.floor_rate);
            dt /= 2.0;
            halvings += 1;
            continue;
        }
        return Ok(batch);
    }
}

/// Deterministic comparator: the same Euler scheme at ε = 0 on the same grid.
pub fn euler_reference(params: &ModelParams, q0: &SymMat, times: &[f64], dt: f64) -> Result<Vec<SymMat>> {
    let p0 = params.with_eps(0.0)?;
    let mut rng = rng_from_seed(0);
    let p = simulate_path_sampled(q0, times, dt, &p0, false, Scheme::Matrix, &mut rng)?;
    if let Some(time) = p.diverged_at {
        return Err(Error::PathDiverged { time });
    }
    Ok(p.q)
}

/// Log–log least-squares fit of a response against ε.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub eps_grid: Vec<f64>,
    pub responses: Vec<f64>,
    pub response_stderr: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
}

impl ScalingFit {
    pub fn new(eps_grid: Vec<f64>, responses: Vec<f64>, response_stderr: Vec<f64>) -> Result<Self> {
        if eps_grid.len() < 4 {
            return Err(Error::InsufficientData("scaling fit needs at least four grid points".into()));
        }
        if eps_grid.windows(2).any(|w| w[1] <= w[0]) || eps_grid[0] <= 0.0 {
            return Err(Error::InvalidArgument("ε grid must be positive and increasing".into()));
        }
        if responses.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InsufficientData("a response is not positive; MC noise exceeds the signal".into()));
        }
        let x: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
        let y: Vec<f64> = responses.iter().map(|r| r.ln()).collect();
        let f = fit_line(&x, &y)?;
        Ok(ScalingFit {
            eps_grid,
            responses,
            response_stderr,
            slope: f.slope,
            slope_stderr: f.slope_stderr,
            intercept: f.intercept,
        })
    }

    /// `|slope − target| ≤ max(tol, 2·SE)`.
    pub fn matches(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol.max(2.0 * self.slope_stderr)
    }
}

/// Bias at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub eps: f64,
    /// `‖φ_t − mean‖₂`.
    pub response: f64,
    pub stderr: f64,
    /// Mean is below `φ_t` in the Loewner order, up to noise.
    pub loewner: LoewnerCheck,
    pub diverged: usize,
    /// ε exceeds `min(ε₁₀(V), ε₀)` for κ = 1.
    pub above_threshold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasCurve {
    pub points: Vec<BiasPoint>,
    pub fit: ScalingFit,
}

fn bias_threshold_exceeded(params: &ModelParams) -> Result<bool> {
    if params.kappa() == Kappa::Zero {
        return Ok(false);
    }
    let th = thresholds(params, 10)?;
    Ok(!th.eps_n_v.min(th.eps0).admits(params.eps()))
}

/// Bias of `Q_t` against the deterministic flow from per-path terminal
/// states. The standard error linearizes `‖·‖₂` at the estimate.
pub fn bias_point(eps: f64, reference: &SymMat, samples: &[SymMat], diverged: usize, above: bool) -> Result<BiasPoint> {
    let mean = super::stats::mean_matrix(samples)?;
    let d = reference - &mean;
    let dec = d.eig();
    let (lmax, lmin) = (dec.lambda_max(), dec.lambda_min());
    let (k, sign) = if lmax.abs() >= lmin.abs() { (0, 1.0) } else { (d.dim() - 1, -1.0) };
    let v = dec.vector(k);
    let lin: Vec<f64> = samples.iter().map(|q| -sign * q.quad(v.as_slice())).collect();
    let stats = batch_means(&lin, DEFAULT_BATCHES);
    Ok(BiasPoint {
        eps,
        response: lmax.abs().max(lmin.abs()),
        stderr: stats.stderr,
        loewner: loewner_below(samples, reference, DEFAULT_BATCHES)?,
        diverged,
        above_threshold: above,
    })
}

/// Bias `‖φ_t(Q0) − E[φ^ε_t(Q0)]‖₂` over an ε grid, with its log–log fit.
#[allow(clippy::too_many_arguments)]
pub fn bias_curve(
    base: &ModelParams,
    q0: &SymMat,
    t: f64,
    eps_grid: &[f64],
    n_paths: usize,
    seed: u64,
    dt: f64,
) -> Result<BiasCurve> {
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let params = base.with_eps(eps)?;
        let above = bias_threshold_exceeded(&params)?;
        if above {
            log::warn!("ε = {eps} exceeds min(ε₁₀(V), ε₀)");
        }
        let batch = simulate_batch(&params, q0, &[t], dt, n_paths, seed, BatchOptions::default())?;
        let reference = euler_reference(&params, q0, &[t], batch.dt)?.remove(0);
        points.push(bias_point(eps, &reference, &batch.at(0), batch.diverged, above)?);
    }
    let fit = ScalingFit::new(
        eps_grid.to_vec(),
        points.iter().map(|p| p.response).collect(),
        points.iter().map(|p| p.stderr).collect(),
    )?;
    Ok(BiasCurve { points, fit })
}

/// `|||Q_t − φ_t|||ₙ` and `sup_i |||λᵢ(Q_t) − λᵢ(φ_t)|||ₙ` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationPoint {
    pub t: f64,
    pub matrix: MomentEstimate,
    pub spectral: MomentEstimate,
}

pub fn fluctuation_point(t: f64, reference: &SymMat, samples: &[SymMat], n: u32, diverged: usize) -> Result<FluctuationPoint> {
    let matrix: Vec<f64> = samples.iter().map(|q| (q - reference).spectral_norm()).collect();
    let lref = reference.eigenvalues();
    let r = reference.dim();
    let mut best: Option<MomentEstimate> = None;
    let eig: Vec<Vec<f64>> = samples.iter().map(|q| q.eigenvalues()).collect();
    for i in 0..r {
        let vals: Vec<f64> = eig.iter().map(|l| (l[i] - lref[i]).abs()).collect();
        let m = moment_from_values(&vals, n, diverged)?;
        if best.is_none_or(|b| m.value > b.value) {
            best = Some(m);
        }
    }
    Ok(FluctuationPoint {
        t,
        matrix: moment_from_values(&matrix, n, diverged)?,
        spectral: best.expect("r ≥ 1"),
    })
}

/// Fluctuation `|||φ^ε_t(Q0) − φ_t(Q0)|||ₙ` over an ε grid.
#[allow(clippy::too_many_arguments)]
pub fn fluctuation_curve(
    base: &ModelParams,
    q0: &SymMat,
    t: f64,
    n: u32,
    eps_grid: &[f64],
    n_paths: usize,
    seed: u64,
    dt: f64,
) -> Result<(ScalingFit, Vec<FluctuationPoint>)> {
    let mut pts = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let params = base.with_eps(eps)?;
        if params.kappa() == Kappa::One {
            let th = thresholds(&params, 10 * n as usize)?;
            if !th.eps_n_v.admits(eps) {
                log::warn!("ε = {eps} exceeds ε_(10n)(V) = {}", th.eps_n_v);
            }
        }
        let batch = simulate_batch(&params, q0, &[t], dt, n_paths, seed, BatchOptions::default())?;
        let reference = euler_reference(&params, q0, &[t], batch.dt)?.remove(0);
        pts.push(fluctuation_point(t, &reference, &batch.at(0), n, batch.diverged)?);
    }
    let fit = ScalingFit::new(
        eps_grid.to_vec(),
        pts.iter().map(|p| p.matrix.value).collect(),
        pts.iter().map(|p| p.matrix.stderr).collect(),
    )?;
    Ok((fit, pts))
}

/// Fluctuation at several times along the same paths.
#[allow(clippy::too_many_arguments)]
pub fn fluctuation_profile(
    params: &ModelParams,
    q0: &SymMat,
    times: &[f64],
    n: u32,
    n_paths: usize,
    seed: u64,
    dt: f64,
) -> Result<Vec<FluctuationPoint>> {
    let batch = simulate_batch(params, q0, times, dt, n_paths, seed, BatchOptions::default())?;
    let refs = euler_reference(params, q0, times, batch.dt)?;
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| fluctuation_point(t, &refs[k], &batch.at(k), n, batch.diverged))
        .collect()
}

/// `max/min` of the responses; 1 means perfectly uniform in time.
pub fn uniformity_ratio(points: &[FluctuationPoint]) -> f64 {
    let v: Vec<f64> = points.iter().map(|p| p.matrix.value).collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// `|||φ^{−ε}_t − φ_t⁻¹|||ₙ` over an ε grid, with the inverse flow simulated
/// by its own SDE and the reference from the same scheme at ε = 0.
#[allow(clippy::too_many_arguments)]
pub fn inverse_fluctuation_curve(
    base: &ModelParams,
    q0: &SymMat,
    t: f64,
    n: u32,
    eps_grid: &[f64],
    n_paths: usize,
    seed: u64,
    dt: f64,
) -> Result<ScalingFit> {
    let p0 = base.with_eps(0.0)?;
    let mut rng = rng_from_seed(0);
    let reference = inverse_sampler(&p0, q0, dt)(t, &mut rng)?;
    let mut resp = Vec::new();
    let mut se = Vec::new();
    for &eps in eps_grid {
        let params = base.with_eps(eps)?;
        let sampler = inverse_sampler(&params, q0, dt);
        let draws = par_map(n_paths, |i| {
            let mut rng = path_rng(seed, i as u64, Purpose::InversePath);
            sampler(t, &mut rng)
        });
        let mut vals = Vec::with_capacity(n_paths);
        let mut diverged = 0;
        for d in draws {
            match d {
                Ok(y) => vals.push((&y - &reference).spectral_norm()),
                Err(Error::PathDiverged { .. }) => diverged += 1,
                Err(e) => return Err(e),
            }
        }
        let m = moment_from_values(&vals, n, diverged)?;
        resp.push(m.value);
        se.push(m.stderr);
    }
    ScalingFit::new(eps_grid.to_vec(), resp, se)
}

/// Terminal semigroup data of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSample {
    pub e: DMatrix<f64>,
    /// `∫₀ᵗ Tr(A − Q_sS) ds`.
    pub trace_integral: f64,
}

/// Simulates `E^ε_t` on `n_paths` paths.
pub fn semigroup_samples(
    params: &ModelParams,
    q0: &SymMat,
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SemigroupSample>> {
    let (n, h) = step_grid(t, dt);
    par_map(n_paths, |i| {
        let mut rng = path_rng(seed, i as u64, Purpose::MatrixPath);
        let mut st = EulerStepper::new(params, q0, true)?;
        for _ in 0..n {
            if !st.step(h, &mut rng) {
                return Err(Error::PathDiverged { time: st.time() });
            }
        }
        Ok(SemigroupSample { e: st.e().expect("tracked").clone(), trace_integral: st.logdet_integral() })
    })
    .into_iter()
    .collect()
}

/// Empirical distribution of `(1/t) log ‖E_t‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovStats {
    pub t: f64,
    pub exponents: Vec<f64>,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub threshold: f64,
    /// Fraction of paths with exponent `< threshold`.
    pub fraction_below: f64,
}

pub fn lyapunov_exponent(e_final: &[DMatrix<f64>], t: f64, threshold: f64) -> Result<LyapunovStats> {
    if e_final.is_empty() {
        return Err(Error::InsufficientData("no paths".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("t must be positive".into()));
    }
    let exponents: Vec<f64> = e_final.iter().map(|e| spectral(e).ln() / t).collect();
    let below = exponents.iter().filter(|&&x| x < threshold).count();
    Ok(LyapunovStats {
        t,
        q05: quantile(&exponents, 0.05),
        median: quantile(&exponents, 0.5),
        q95: quantile(&exponents, 0.95),
        threshold,
        fraction_below: below as f64 / exponents.len() as f64,
        exponents,
    })
}

fn spectral(e: &DMatrix<f64>) -> f64 {
    crate::matcore::spectral_norm(e)
}

/// Determinant decay rate against its closed-form lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetDecay {
    /// `−(1/(t·n)) log E[det(E_t)ⁿ]`.
    pub rate: f64,
    pub stderr: f64,
    /// `√Tr(R^ε_n S^ε_n)`.
    pub bound: f64,
    pub n_paths: usize,
}

/// Decay rate from per-path `log det E_t` values (log-sum-exp domain).
pub fn det_decay_rate(logdets: &[f64], n: u32, t: f64, params: &ModelParams) -> Result<DetDecay> {
    if logdets.is_empty() {
        return Err(Error::InsufficientData("no paths".into()));
    }
    let th = thresholds(params, n as usize)?;
    if th.r_eps_n.lambda_min() <= 0.0 || th.s_eps_n.lambda_min() <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "R^ε_n or S^ε_n is not positive definite at ε = {}, n = {n}",
            params.eps()
        )));
    }
    let nf = n as f64;
    let scaled: Vec<f64> = logdets.iter().map(|l| nf * l).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scaled.iter().map(|x| (x - m).exp()).collect();
    let s = batch_means(&w, DEFAULT_BATCHES);
    let log_mean = log_sum_exp(&scaled) - (logdets.len() as f64).ln();
    let rate = -log_mean / (t * nf);
    let stderr = s.stderr / (s.mean * t * nf);
    let bound = th.r_eps_n.inner(&th.s_eps_n).max(0.0).sqrt();
    Ok(DetDecay { rate, stderr, bound, n_paths: logdets.len() })
}

/// Empirical `W₁` distance between the laws of `Λ(Q_t)` from two starts.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityCurve {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Fitted exponential decay rate of the distance.
    pub rate: f64,
}

impl StationarityCurve {
    /// No increase beyond `k` standard errors between consecutive times
    /// from `t_from` on.
    pub fn nonincreasing_after(&self, t_from: f64, k: f64) -> bool {
        let idx: Vec<usize> = (0..self.times.len()).filter(|&i| self.times[i] >= t_from).collect();
        idx.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let slack = k * (self.stderr[a].powi(2) + self.stderr[b].powi(2)).sqrt();
            self.distance[b] <= self.distance[a] + slack
        })
    }
}

const BOOTSTRAP_REPS: usize = 200;

/// Both starts use the same Brownian streams path by path.
#[allow(clippy::too_many_arguments)]
pub fn stationarity_diagnostic(
    params: &ModelParams,
    q0_a: &SymMat,
    q0_b: &SymMat,
    times: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StationarityCurve> {
    let th = thresholds(params, 1)?;
    if !th.moment_range().admits(params.eps()) {
        return Err(Error::ThresholdExceeded(format!(
            "ε = {} above min(ε₁(V), ε₁(U,V)) = {}",
            params.eps(),
            th.moment_range()
        )));
    }
    for q in [q0_a, q0_b] {
        if q.lambda_min() <= 0.0 {
            return Err(Error::InvalidArgument("initial states must be positive definite".into()));
        }
    }
    let opts = BatchOptions { auto_halve: false, ..BatchOptions::default() };
    let a = simulate_batch(params, q0_a, times, dt, n_paths, seed, opts)?;
    let b = simulate_batch(params, q0_b, times, dt, n_paths, seed, opts)?;
    let mut boot_rng = rng_from_seed(seed ^ 0xB007_5712_AB1E);
    let boot_idx: Vec<Vec<usize>> = (0..BOOTSTRAP_REPS)
        .map(|_| {
            let m = a.states.len().min(b.states.len());
            (0..m).map(|_| boot_rng.random_range(0..m)).collect()
        })
        .collect();
    let mut distance = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let la: Vec<f64> = a.states.iter().map(|s| lambda_function(&s[k])).collect();
        let lb: Vec<f64> = b.states.iter().map(|s| lambda_function(&s[k])).collect();
        distance.push(wasserstein1(&la, &lb)?);
        let reps: Vec<f64> = boot_idx
            .iter()
            .map(|idx| {
                let xa: Vec<f64> = idx.iter().map(|&i| la[i]).collect();
                let xb: Vec<f64> = idx.iter().map(|&i| lb[i]).collect();
                wasserstein1(&xa, &xb)
            })
            .collect::<Result<_>>()?;
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        let sd = (reps.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
        stderr.push(sd);
    }
    let pts: Vec<(f64, f64)> = times.iter().zip(&distance).filter(|(_, d)| **d > 0.0).map(|(t, d)| (*t, d.ln())).collect();
    let rate = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        -fit_line(&x, &y)?.slope
    } else {
        f64::INFINITY
    };
    Ok(StationarityCurve { times: times.to_vec(), distance, stderr, rate })
}

/// Weak-error gap between step sizes `dt` and `dt/2` against the
/// statistical standard error of the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonCheck {
    pub coarse: f64,
    pub fine: f64,
    pub gap: f64,
    pub stderr: f64,
}

impl RichardsonCheck {
    pub fn passes(&self) -> bool {
        self.gap <= self.stderr
    }
}

/// Runs each path at `dt` and at `dt/2` on one Brownian path (the coarse
/// increment is the sum of two fine ones) and compares `E[f(Q_t)]`.
#[allow(clippy::too_many_arguments)]
pub fn richardson_check<F>(
    params: &ModelParams,
    q0: &SymMat,
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<RichardsonCheck>
where
    F: Fn(&SymMat) -> f64 + Sync + Send,
{
    let (n, h) = step_grid(t, dt);
    let r = params.dim();
    let pairs = par_map(n_paths, |i| -> Result<Option<(f64, f64)>> {
        let mut rng = path_rng(seed, i as u64, Purpose::Comparison);
        let mut coarse = EulerStepper::new(params, q0, false)?;
        let mut fine = EulerStepper::new(params, q0, false)?;
        let sh = (h / 2.0).sqrt();
        for _ in 0..n {
            let w1 = DMatrix::from_fn(r, r, |_, _| crate::rng::normal(&mut rng) * sh);
            let w2 = DMatrix::from_fn(r, r, |_, _| crate::rng::normal(&mut rng) * sh);
            let ok = fine.step_driven(h / 2.0, &w1) && fine.step_driven(h / 2.0, &w2) && coarse.step_driven(h, &(&w1 + &w2));
            if !ok {
                return Ok(None);
            }
        }
        Ok(Some((f(coarse.q()), f(fine.q()))))
    });
    let mut c = Vec::with_capacity(n_paths);
    let mut fv = Vec::with_capacity(n_paths);
    for p in pairs {
        if let Some((a, b)) = p? {
            c.push(a);
            fv.push(b);
        }
    }
    if fv.len() < 2 {
        return Err(Error::InsufficientData("too few non-diverged paths".into()));
    }
    let sc = batch_means(&c, DEFAULT_BATCHES);
    let sf = batch_means(&fv, DEFAULT_BATCHES);
    Ok(RichardsonCheck { coarse: sc.mean, fine: sf.mean, gap: (sc.mean - sf.mean).abs(), stderr: sf.stderr })
}

/// Mean of a scalar functional of `Q_t` with its batch-means error.
pub fn mean_functional(samples: &[SymMat], f: impl Fn(&SymMat) -> f64) -> (f64, f64) {
    let v: Vec<f64> = samples.iter().map(f).collect();
    let s = batch_means(&v, DEFAULT_BATCHES);
    (s.mean, s.stderr)
}
