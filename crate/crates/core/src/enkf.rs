//! Linear-Gaussian filtering: truth simulation, the Kalman-Bucy filter and
//! ensemble Kalman-Bucy particle systems.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::matcore::{expm, sqrt_psd, SymMat};
use crate::riccati::{integrate_det_flow, step_grid, Kappa, ModelParams};
use crate::rng::{normal, rng_from_seed};

/// Signal `d𝒳 = A𝒳dt + R1^{1/2}dW`, observation `d𝒴 = B𝒳dt + R2^{1/2}dV`.
#[derive(Debug, Clone)]
pub struct FilterModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    r1: SymMat,
    r2: SymMat,
    s: SymMat,
    r1_sqrt: DMatrix<f64>,
    r2_sqrt: DMatrix<f64>,
    /// `BᵀR2⁻¹`.
    bt_r2inv: DMatrix<f64>,
}

impl FilterModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, r1: SymMat, r2: SymMat) -> Result<Self> {
        let r = a.nrows();
        if a.ncols() != r {
            return Err(Error::InvalidArgument("A must be square".into()));
        }
        check_dim(r, b.ncols())?;
        check_dim(r, r1.dim())?;
        check_dim(b.nrows(), r2.dim())?;
        if r2.lambda_min() <= 0.0 {
            return Err(Error::InvalidArgument("R2 must be positive definite".into()));
        }
        let r1_sqrt = sqrt_psd(&r1)?.to_dense();
        let r2_sqrt = sqrt_psd(&r2)?.to_dense();
        let r2inv = r2.inverse()?.to_dense();
        let bt_r2inv = b.transpose() * r2inv;
        let s = SymMat::sym_part(&(&bt_r2inv * &b));
        Ok(FilterModel { a, b, r1, r2, s, r1_sqrt, r2_sqrt, bt_r2inv })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn obs_dim(&self) -> usize {
        self.b.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn r1(&self) -> &SymMat {
        &self.r1
    }
    pub fn r2(&self) -> &SymMat {
        &self.r2
    }
    /// `S = BᵀR2⁻¹B`.
    pub fn s(&self) -> &SymMat {
        &self.s
    }

    /// Riccati model `(A, R1, S)` with the given diffusion parameters.
    pub fn riccati_params(&self, kappa: Kappa, varpi: f64, eps: f64) -> Result<ModelParams> {
        ModelParams::new(self.a.clone(), self.r1.clone(), self.s.clone(), kappa, varpi, eps)
    }
}

/// Signal path and observation increments on a uniform grid.
#[derive(Debug, Clone)]
pub struct Truth {
    pub grid: Vec<f64>,
    pub dt: f64,
    pub x: Vec<DVector<f64>>,
    /// `dy[k]` is the increment over `[grid[k], grid[k+1]]`.
    pub dy: Vec<DVector<f64>>,
}

/// Exact one-step transition `(e^{Ah}, ∫₀ʰ e^{As}R1e^{Aᵀs}ds)` by Van Loan's
/// block exponential.
pub fn ou_transition(a: &DMatrix<f64>, r1: &SymMat, h: f64) -> (DMatrix<f64>, SymMat) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    m.view_mut((0, n), (n, n)).copy_from(&(r1.to_dense() * h));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let f = expm(&m);
    let phi = f.view((n, n), (n, n)).transpose();
    let cov = &phi * f.view((0, n), (n, n));
    (phi, SymMat::sym_part(&cov))
}

/// Simulates the signal with its exact Gaussian transition and the
/// observation increments `B𝒳_k h + R2^{1/2}ΔV_k`.
pub fn simulate_truth<R: Rng + ?Sized>(
    model: &FilterModel,
    x0: &DVector<f64>,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Truth> {
    check_dim(model.dim(), x0.len())?;
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and T ≥ 0".into()));
    }
    let (n, h) = step_grid(t, dt);
    let (phi, cov) = ou_transition(&model.a, &model.r1, h);
    let root = sqrt_psd(&cov.floor_psd().0)?.to_dense();
    let (r, ro) = (model.dim(), model.obs_dim());
    let sh = h.sqrt();
    let mut x = x0.clone();
    let mut out = Truth { grid: vec![0.0], dt: h, x: vec![x.clone()], dy: Vec::with_capacity(n) };
    for k in 0..n {
        let dv = DVector::from_fn(ro, |_, _| normal(rng) * sh);
        out.dy.push(&model.b * &x * h + &model.r2_sqrt * dv);
        let z = DVector::from_fn(r, |_, _| normal(rng));
        x = &phi * &x + &root * z;
        out.x.push(x.clone());
        out.grid.push((k + 1) as f64 * h);
    }
    Ok(out)
}

/// Seeded convenience wrapper around [`simulate_truth`].
pub fn simulate_truth_seeded(model: &FilterModel, x0: &DVector<f64>, t: f64, dt: f64, seed: u64) -> Result<Truth> {
    simulate_truth(model, x0, t, dt, &mut rng_from_seed(seed))
}

/// Kalman-Bucy mean and covariance on the observation grid.
#[derive(Debug, Clone)]
pub struct KalmanPath {
    pub grid: Vec<f64>,
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<SymMat>,
}

/// Kalman-Bucy filter driven by observation increments `dy` on step `dt`.
/// The covariance is the deterministic Riccati flow of `(A, R1, S)`.
pub fn kalman_bucy(
    model: &FilterModel,
    dy: &[DVector<f64>],
    m0: &DVector<f64>,
    p0: &SymMat,
    dt: f64,
) -> Result<KalmanPath> {
    check_dim(model.dim(), m0.len())?;
    let params = model.riccati_params(Kappa::Zero, 0.0, 0.0)?;
    let t = dt * dy.len() as f64;
    let flow = integrate_det_flow(p0, t, dt, &params)?;
    if flow.phi.len() != dy.len() + 1 {
        return Err(Error::InvalidArgument("observation grid does not match dt".into()));
    }
    let s = model.s.to_dense();
    let mut m = m0.clone();
    let mut mean = Vec::with_capacity(dy.len() + 1);
    mean.push(m.clone());
    for (k, d) in dy.iter().enumerate() {
        let p = flow.phi[k].to_dense();
        let gain = &p * &model.bt_r2inv;
        m = &m + (&model.a - &p * &s) * &m * dt + gain * d;
        for &v in m.iter() {
            if !v.is_finite() {
                return Err(Error::PathDiverged { time: flow.times[k + 1] });
            }
        }
        mean.push(m.clone());
    }
    Ok(KalmanPath { grid: flow.times, mean, cov: flow.phi })
}

/// McKean–Vlasov variant of the particle system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnkfType {
    /// Perturbed observations.
    One,
    /// Deterministic midpoint innovation.
    Two,
}

impl EnkfType {
    pub fn from_int(k: i64) -> Result<Self> {
        match k {
            1 => Ok(EnkfType::One),
            2 => Ok(EnkfType::Two),
            _ => Err(Error::InvalidArgument(format!("EnKF type must be 1 or 2, got {k}"))),
        }
    }
}

/// `N + 1` particles.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub particles: Vec<DVector<f64>>,
    pub kind: EnkfType,
    pub varpi: f64,
}

impl Ensemble {
    pub fn new(particles: Vec<DVector<f64>>, kind: EnkfType, varpi: f64) -> Result<Self> {
        if particles.len() < 2 {
            return Err(Error::InvalidArgument("need N ≥ 1, i.e. at least two particles".into()));
        }
        let r = particles[0].len();
        if particles.iter().any(|p| p.len() != r) {
            return Err(Error::InvalidArgument("particles have different dimensions".into()));
        }
        if !(varpi >= 0.0) {
            return Err(Error::InvalidArgument(format!("inflation must be ≥ 0, got {varpi}")));
        }
        Ok(Ensemble { particles, kind, varpi })
    }

    /// `N + 1` draws from `N(m0, P0)`.
    pub fn gaussian<R: Rng + ?Sized>(
        n: usize,
        m0: &DVector<f64>,
        p0: &SymMat,
        kind: EnkfType,
        varpi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_dim(m0.len(), p0.dim())?;
        let root = sqrt_psd(p0)?.to_dense();
        let r = m0.len();
        let particles = (0..=n).map(|_| m0 + &root * DVector::from_fn(r, |_, _| normal(rng))).collect();
        Ensemble::new(particles, kind, varpi)
    }

    /// `N`, one less than the number of particles.
    pub fn n(&self) -> usize {
        self.particles.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }
}

/// Sample mean and `(1 + 1/N)`-rescaled sample covariance.
pub fn sample_stats(ens: &Ensemble) -> (DVector<f64>, SymMat) {
    let r = ens.dim();
    let count = ens.particles.len() as f64;
    let mut m = DVector::zeros(r);
    for p in &ens.particles {
        m += p;
    }
    m /= count;
    let mut c = DMatrix::zeros(r, r);
    for p in &ens.particles {
        let d = p - &m;
        c += &d * d.transpose();
    }
    let scale = (1.0 + 1.0 / ens.n() as f64) / count;
    (m, SymMat::sym_part(&(c * scale)))
}

/// One Euler step of the particle system with shared increment `dy`.
pub fn enkf_step<R: Rng + ?Sized>(ens: &mut Ensemble, dy: &DVector<f64>, model: &FilterModel, dt: f64, rng: &mut R) {
    let (m, p) = sample_stats(ens);
    let mut pg = p.to_dense();
    for i in 0..pg.nrows() {
        pg[(i, i)] += ens.varpi;
    }
    let gain = pg * &model.bt_r2inv;
    let (r, ro) = (model.dim(), model.obs_dim());
    let sh = dt.sqrt();
    let kind = ens.kind;
    let bm = &model.b * &m;
    for x in ens.particles.iter_mut() {
        let dw = DVector::from_fn(r, |_, _| normal(rng) * sh);
        let innovation = match kind {
            EnkfType::One => {
                let dv = DVector::from_fn(ro, |_, _| normal(rng) * sh);
                dy - (&model.b * &*x * dt + &model.r2_sqrt * dv)
            }
            EnkfType::Two => dy - (&model.b * &*x + &bm) * (0.5 * dt),
        };
        let next = &*x + &model.a * &*x * dt + &model.r1_sqrt * dw + &gain * innovation;
        *x = next;
    }
}

/// Ensemble statistics recorded along a filter run.
#[derive(Debug, Clone)]
pub struct EnkfRecord {
    pub times: Vec<f64>,
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<SymMat>,
}

/// Runs the particle filter over the whole observation record, storing
/// statistics every `record_every` steps (and at the end).
pub fn run_enkf<R: Rng + ?Sized>(
    model: &FilterModel,
    mut ens: Ensemble,
    truth: &Truth,
    record_every: usize,
    rng: &mut R,
) -> Result<EnkfRecord> {
    check_dim(model.dim(), ens.dim())?;
    let every = record_every.max(1);
    let (m, p) = sample_stats(&ens);
    let mut rec = EnkfRecord { times: vec![0.0], mean: vec![m], cov: vec![p] };
    let n = truth.dy.len();
    for (k, d) in truth.dy.iter().enumerate() {
        enkf_step(&mut ens, d, model, truth.dt, rng);
        if (k + 1) % every == 0 || k + 1 == n {
            let (m, p) = sample_stats(&ens);
            rec.times.push(truth.grid[k + 1]);
            rec.mean.push(m);
            rec.cov.push(p);
        }
    }
    Ok(rec)
}

/// Riccati-diffusion model whose law matches the drift and noise of the
/// rescaled sample covariance.
///
/// Type (2) is exact: `(A − ϖS/2, R1, S)`, `κ = 0`, `ε = 2/√N`.
/// Type (1) returns `(A, R1 + ϖ²S, S)`, `κ = 1`, `ϖ`, `ε = 2/√N`; its drift is
/// exact and its diffusion carries an extra `ϖ²S` term when `ϖ > 0`.
pub fn riccati_correspondence(model: &FilterModel, kind: EnkfType, n: usize, varpi: f64) -> Result<ModelParams> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    let eps = 2.0 / (n as f64).sqrt();
    let s = model.s.clone();
    match kind {
        EnkfType::Two => {
            let a = &model.a - s.to_dense() * (varpi / 2.0);
            ModelParams::new(a, model.r1.clone(), s, Kappa::Zero, 0.0, eps)
        }
        EnkfType::One => {
            let r = &model.r1 + &s.scale(varpi * varpi);
            ModelParams::new(model.a.clone(), r, s, Kappa::One, varpi, eps)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::solve_fixed_point;

    fn scalar_model(a: f64, b: f64, r1: f64, r2: f64) -> FilterModel {
        FilterModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            SymMat::from_diag(&[r1]),
            SymMat::from_diag(&[r2]),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_signal_is_exponential_flow() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 1.0, -1.0, -0.2]);
        let m = FilterModel::new(a.clone(), DMatrix::identity(2, 2), SymMat::zeros(2), SymMat::identity(2)).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -0.5]);
        let tr = simulate_truth_seeded(&m, &x0, 2.0, 1e-2, 3).unwrap();
        for (t, x) in tr.grid.iter().zip(&tr.x) {
            let exact = expm(&(&a * *t)) * &x0;
            assert!((x - exact).amax() < 1e-8);
        }
    }

    #[test]
    fn sample_stats_examples() {
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let e = Ensemble::new(vec![x.clone(), -x.clone()], EnkfType::One, 0.0).unwrap();
        let (m, p) = sample_stats(&e);
        assert_eq!(m.amax(), 0.0);
        let expect = SymMat::sym_part(&(&x * x.transpose() * 2.0));
        assert!(p.max_abs_diff(&expect) < 1e-15);
        let e = Ensemble::new(vec![x.clone(); 5], EnkfType::Two, 0.0).unwrap();
        assert_eq!(sample_stats(&e).1, SymMat::zeros(2));
    }

    #[test]
    fn steady_state_kalman_covariance() {
        let m = scalar_model(1.0, 1.0, 1.0, 1.0);
        let tr = simulate_truth_seeded(&m, &DVector::zeros(1), 20.0, 1e-2, 1).unwrap();
        let kb = kalman_bucy(&m, &tr.dy, &DVector::zeros(1), &SymMat::zeros(1), 1e-2).unwrap();
        let p = kb.cov.last().unwrap().get(0, 0);
        assert!((p - (1.0 + 2f64.sqrt())).abs() < 1e-10);
        let pinf = solve_fixed_point(&m.riccati_params(Kappa::Zero, 0.0, 0.0).unwrap()).unwrap();
        assert!((p - pinf.get(0, 0)).abs() < 1e-10);
    }

    #[test]
    fn no_observations_means_no_gain() {
        let m = FilterModel::new(
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.3]),
            DMatrix::zeros(1, 2),
            SymMat::identity(2),
            SymMat::from_diag(&[1.0]),
        )
        .unwrap();
        assert_eq!(m.s(), &SymMat::zeros(2));
        let mut rng = rng_from_seed(4);
        let tr = simulate_truth(&m, &DVector::zeros(2), 1.0, 1e-2, &mut rng).unwrap();
        let m0 = DVector::from_vec(vec![1.0, 1.0]);
        let kb = kalman_bucy(&m, &tr.dy, &m0, &SymMat::identity(2), 1e-2).unwrap();
        let last = kb.mean.last().unwrap();
        assert!((last[0] - 0.995f64.powi(100)).abs() < 1e-12);
        assert!((last[1] - 1.003f64.powi(100)).abs() < 1e-12);
    }

    #[test]
    fn single_particle_pair_without_observations() {
        let m = FilterModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::zeros(1, 1),
            SymMat::zeros(1),
            SymMat::from_diag(&[1.0]),
        )
        .unwrap();
        let mut ens = Ensemble::new(vec![DVector::from_element(1, 2.0), DVector::from_element(1, 1.0)], EnkfType::One, 0.0).unwrap();
        let mut rng = rng_from_seed(0);
        let dy = DVector::from_element(1, 0.3);
        enkf_step(&mut ens, &dy, &m, 0.1, &mut rng);
        assert!((ens.particles[0][0] - 1.8).abs() < 1e-15);
        assert!((ens.particles[1][0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn correspondence_types() {
        let m = scalar_model(0.5, 1.0, 1.0, 1.0);
        let p2 = riccati_correspondence(&m, EnkfType::Two, 100, 0.4).unwrap();
        assert_eq!(p2.kappa(), Kappa::Zero);
        assert!((p2.a()[(0, 0)] - 0.3).abs() < 1e-15);
        assert!((p2.eps() - 0.2).abs() < 1e-15);
        let p1 = riccati_correspondence(&m, EnkfType::One, 4, 0.4).unwrap();
        assert_eq!(p1.kappa(), Kappa::One);
        assert!((p1.r().get(0, 0) - 1.16).abs() < 1e-15);
        assert_eq!(p1.eps(), 1.0);
    }
}
