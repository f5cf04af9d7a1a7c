//! Eigenvalue dynamics of the Riccati diffusion.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matcore::SymMat;
use crate::riccati::{sigma_unchecked, theta_dense, ModelParams, RiccatiPath};
use crate::rng::{normal, rng_from_seed};

/// Maximum number of step halvings before a collision is fatal.
pub const MAX_HALVINGS: u32 = 30;

/// Ordered eigenvalue trajectory.
#[derive(Debug, Clone)]
pub struct EigenPath {
    pub grid: Vec<f64>,
    /// Each entry sorted in decreasing order.
    pub lambdas: Vec<Vec<f64>>,
    /// Number of rejected sub-steps.
    pub collision_events: usize,
}

impl EigenPath {
    pub fn final_lambdas(&self) -> &[f64] {
        self.lambdas.last().expect("path has at least one point")
    }
}

/// Scalar coefficients of the isotropic model:
/// `Θ(λ) = 2aλ + rr − ssλ²`, `Σ(λ) = uu + vvλ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicCoefficients {
    pub a: f64,
    pub rr: f64,
    pub ss: f64,
    pub uu: f64,
    pub vv: f64,
}

impl IsotropicCoefficients {
    pub fn theta(&self, l: f64) -> f64 {
        2.0 * self.a * l + self.rr - self.ss * l * l
    }
    pub fn sigma(&self, l: f64) -> f64 {
        self.uu + self.vv * l * l
    }
}

/// Interaction terms `(ε²/4) Σ_{j≠i} (λᵢΣ(λⱼ) + λⱼΣ(λᵢ))/(λᵢ − λⱼ)`.
pub fn repulsion(c: &IsotropicCoefficients, lambdas: &[f64], eps: f64) -> Vec<f64> {
    let e2 = eps * eps / 4.0;
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let si = c.sigma(li);
            e2 * lambdas
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| (li * c.sigma(lj) + lj * si) / (li - lj))
                .sum::<f64>()
        })
        .collect()
}

/// Full drift of the eigenvalue system.
pub fn eigen_drift(c: &IsotropicCoefficients, lambdas: &[f64], eps: f64) -> Vec<f64> {
    let rep = repulsion(c, lambdas, eps);
    lambdas.iter().zip(rep).map(|(&l, r)| c.theta(l) + r).collect()
}

fn ordered_positive(l: &[f64]) -> bool {
    l.iter().all(|x| x.is_finite()) && l.last().is_some_and(|&x| x > 0.0) && l.windows(2).all(|w| w[0] > w[1])
}

fn try_step(c: &IsotropicCoefficients, l: &[f64], eps: f64, h: f64, dw: &[f64]) -> Vec<f64> {
    let drift = eigen_drift(c, l, eps);
    l.iter()
        .zip(drift)
        .zip(dw)
        .map(|((&x, d), &w)| x + d * h + eps * (x * c.sigma(x)).sqrt() * w)
        .collect()
}

/// Advances over `h` with Brownian increments `dw`. A failed step is split
/// in two with a Brownian-bridge midpoint, so the driving noise is kept.
fn advance<R: Rng + ?Sized>(
    c: &IsotropicCoefficients,
    l: &[f64],
    eps: f64,
    h: f64,
    dw: &[f64],
    depth: u32,
    t: f64,
    rejections: &mut usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let next = try_step(c, l, eps, h, dw);
    if ordered_positive(&next) {
        return Ok(next);
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::CollisionFailure { time: t, halvings: depth });
    }
    *rejections += 1;
    let sd = (h / 4.0).sqrt();
    let first: Vec<f64> = dw.iter().map(|w| 0.5 * w + sd * normal(rng)).collect();
    let second: Vec<f64> = dw.iter().zip(&first).map(|(w, f)| w - f).collect();
    let mid = advance(c, l, eps, h / 2.0, &first, depth + 1, t, rejections, rng)?;
    advance(c, &mid, eps, h / 2.0, &second, depth + 1, t + h / 2.0, rejections, rng)
}

/// Euler–Maruyama for the autonomous eigenvalue system of the isotropic
/// model, started from `lambda0` (strictly decreasing, positive).
pub fn simulate_eigenvalues_from(
    c: &IsotropicCoefficients,
    lambda0: &[f64],
    eps: f64,
    t: f64,
    dt: f64,
    rng: &mut (impl Rng + ?Sized),
) -> Result<EigenPath> {
    let r = lambda0.len();
    if r == 0 {
        return Err(Error::InvalidArgument("need at least one eigenvalue".into()));
    }
    if !(c.ss > 0.0 && c.rr > 0.0) {
        return Err(Error::InvalidArgument("ss and rr must be positive".into()));
    }
    if c.uu < 0.0 || c.vv < 0.0 {
        return Err(Error::InvalidArgument("uu and vv must be non-negative".into()));
    }
    let eps0 = 2.0 / ((r + 1) as f64).sqrt();
    if !(0.0..=eps0).contains(&eps) {
        return Err(Error::ThresholdExceeded(format!("ε = {eps} outside [0, {eps0}]")));
    }
    if !ordered_positive(lambda0) {
        return Err(Error::InvalidArgument("initial eigenvalues must be positive and strictly decreasing".into()));
    }
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and T ≥ 0".into()));
    }
    let (n, h) = crate::riccati::step_grid(t, dt);
    let mut path = EigenPath { grid: vec![0.0], lambdas: vec![lambda0.to_vec()], collision_events: 0 };
    let mut l = lambda0.to_vec();
    let sh = h.sqrt();
    for k in 0..n {
        let dw: Vec<f64> = (0..r).map(|_| normal(rng) * sh).collect();
        l = advance(c, &l, eps, h, &dw, 0, k as f64 * h, &mut path.collision_events, rng)?;
        path.grid.push((k + 1) as f64 * h);
        path.lambdas.push(l.clone());
    }
    Ok(path)
}

/// Isotropic eigenvalue simulation started from `r` evenly spread values
/// around the scalar fixed point.
#[allow(clippy::too_many_arguments)]
pub fn simulate_isotropic_eigenvalues(
    a: f64,
    rr: f64,
    ss: f64,
    uu: f64,
    vv: f64,
    r: usize,
    eps: f64,
    t: f64,
    dt: f64,
    seed: u64,
) -> Result<EigenPath> {
    let c = IsotropicCoefficients { a, rr, ss, uu, vv };
    if !(ss > 0.0) {
        return Err(Error::InvalidArgument("ss must be positive".into()));
    }
    let p = (a + (a * a + rr * ss).sqrt()) / ss;
    let lambda0: Vec<f64> = (0..r).map(|i| p * (1.0 + 0.5 * (r - 1 - 2 * i) as f64 / r as f64)).collect();
    let mut rng = rng_from_seed(seed);
    simulate_eigenvalues_from(&c, &lambda0, eps, t, dt, &mut rng)
}

/// Ordinary least squares fit `y = slope·x + intercept` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRegression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// Instantaneous eigenvalue drift of the general model at `q`:
/// `qᵢᵀΘ(Q)qᵢ + (ε²/4)Σ_{j≠i}(λᵢΣⱼⱼ + λⱼΣᵢᵢ)/(λᵢ − λⱼ)` in the
/// eigenbasis of `Q`. `None` if two eigenvalues are closer than `1e−6`.
pub fn general_eigen_drift(q: &SymMat, params: &ModelParams) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = q.eig();
    let l = &d.eigenvalues;
    if l.windows(2).any(|w| w[0] - w[1] < 1e-6) {
        return None;
    }
    let th = theta_dense(params.a(), params.r(), params.s(), q);
    let sig = sigma_unchecked(q, params);
    let n = q.dim();
    let proj = |m: &SymMat, i: usize| m.quad(d.vector(i).as_slice());
    let sig_ii: Vec<f64> = (0..n).map(|i| proj(&sig, i)).collect();
    let e2 = params.eps() * params.eps() / 4.0;
    let drift = (0..n)
        .map(|i| {
            let rep: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (l[i] * sig_ii[j] + l[j] * sig_ii[i]) / (l[i] - l[j]))
                .sum();
            proj(&th, i) + e2 * rep
        })
        .collect();
    Some((l.clone(), drift))
}

/// Regresses observed `Δλᵢ/Δt` on the predicted drift over every step of
/// every path.
pub fn eigen_drift_diagnostic_pooled(paths: &[RiccatiPath], params: &ModelParams) -> Result<DriftRegression> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut skipped = 0;
    for path in paths {
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for k in 0..path.q.len() {
            let cur = general_eigen_drift(&path.q[k], params);
            if k > 0 {
                match (&prev, cur.is_some()) {
                    (Some((l0, d0)), true) => {
                        let h = path.grid[k] - path.grid[k - 1];
                        let l1 = path.q[k].eigenvalues();
                        for i in 0..l0.len() {
                            xs.push(d0[i]);
                            ys.push((l1[i] - l0[i]) / h);
                        }
                    }
                    _ => skipped += 1,
                }
            }
            prev = cur;
        }
    }
    ols(&xs, &ys, skipped)
}

/// Drift regression on a single matrix path.
pub fn eigen_drift_diagnostic(path: &RiccatiPath, params: &ModelParams) -> Result<DriftRegression> {
    eigen_drift_diagnostic_pooled(std::slice::from_ref(path), params)
}

fn ols(x: &[f64], y: &[f64], skipped: usize) -> Result<DriftRegression> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} usable samples, need at least 3")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("predicted drift has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Ok(DriftRegression {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        samples: n,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{simulate_path, Kappa};

    fn unit() -> IsotropicCoefficients {
        IsotropicCoefficients { a: 1.0, rr: 1.0, ss: 1.0, uu: 1.0, vv: 0.0 }
    }

    #[test]
    fn reference_drift_form() {
        let c = unit();
        let l = [2.5, 1.2, 0.4];
        let eps = 0.3;
        let d = eigen_drift(&c, &l, eps);
        for i in 0..3 {
            let mut rep = 0.0;
            for j in 0..3 {
                if j != i {
                    rep += (l[i] + l[j]) / (l[i] - l[j]);
                }
            }
            let expect = 2.0 * l[i] + 1.0 - l[i] * l[i] + eps * eps / 4.0 * rep;
            assert!((d[i] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn repulsion_sign_for_adjacent_pairs() {
        let c = IsotropicCoefficients { a: 0.3, rr: 1.0, ss: 2.0, uu: 1.0, vv: 0.5 };
        let l = [1.0, 1.0 - 1e-4];
        let rep = repulsion(&c, &l, 0.5);
        assert!(rep[0] > 0.0 && rep[1] < 0.0);
    }

    #[test]
    fn zero_noise_eigenvalues_meet_at_fixed_point() {
        let c = IsotropicCoefficients { a: 1.0, rr: 1.0, ss: 1.0, uu: 1.0, vv: 1.0 };
        let mut rng = rng_from_seed(0);
        let path = simulate_eigenvalues_from(&c, &[4.0, 2.0, 0.3], 0.0, 20.0, 1e-3, &mut rng).unwrap();
        for l in path.final_lambdas() {
            assert!((l - (1.0 + 2f64.sqrt())).abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_case_stationary_mean() {
        // r = 1 is the scalar Riccati diffusion; at small ε its stationary
        // mean sits at the deterministic fixed point up to O(ε²).
        let (a, rr, ss): (f64, f64, f64) = (0.5, 1.0, 1.0);
        let p = (a + (a * a + rr * ss).sqrt()) / ss;
        let n = 400;
        let mut acc = Vec::with_capacity(n);
        for s in 0..n as u64 {
            let path = simulate_isotropic_eigenvalues(a, rr, ss, rr, 0.0, 1, 0.1, 30.0, 1e-2, s).unwrap();
            acc.push(path.final_lambdas()[0]);
        }
        let mean = acc.iter().sum::<f64>() / n as f64;
        let sd = (acc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - p).abs() <= 3.0 * se, "mean {mean} fixed point {p} se {se}");
    }

    #[test]
    fn bad_inputs() {
        let c = unit();
        let mut rng = rng_from_seed(1);
        assert!(simulate_eigenvalues_from(&c, &[1.0, 2.0], 0.1, 1.0, 0.01, &mut rng).is_err());
        assert!(matches!(
            simulate_eigenvalues_from(&c, &[2.0, 1.0], 1.5, 1.0, 0.01, &mut rng),
            Err(Error::ThresholdExceeded(_))
        ));
    }

    #[test]
    fn zero_noise_drift_regression() {
        let p = ModelParams::isotropic(2, 1.0, 1.0, 1.0, Kappa::One, 0.0, 0.0).unwrap();
        let q0 = SymMat::from_row_slice(2, &[3.0, 0.5, 0.5, 0.2]).unwrap();
        let path = simulate_path(&q0, 3.0, 1e-3, &p, 0).unwrap();
        let reg = eigen_drift_diagnostic(&path, &p).unwrap();
        assert!((reg.slope - 1.0).abs() < 0.02, "{reg:?}");
    }
}
