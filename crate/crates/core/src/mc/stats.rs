use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcore::SymMat;

/// Default number of batches for batch-means error bars.
pub const DEFAULT_BATCHES: usize = 20;

/// Runs `f(0), …, f(n−1)` in parallel; results come back in index order.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub batches: usize,
}

/// Splits `values` into `batches` contiguous blocks (the first `n mod b`
/// blocks one longer) and returns the overall mean with `sd(batch means)/√b`.
pub fn batch_means(values: &[f64], batches: usize) -> BatchStats {
    let n = values.len();
    let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
    let b = batches.min(n).max(1);
    if b < 2 {
        return BatchStats { mean, stderr: 0.0, n, batches: b };
    }
    let means = batch_split(values, b)
        .into_iter()
        .map(|chunk| chunk.iter().sum::<f64>() / chunk.len() as f64)
        .collect::<Vec<_>>();
    let mb = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mb).powi(2)).sum::<f64>() / (b - 1) as f64;
    BatchStats { mean, stderr: (var / b as f64).sqrt(), n, batches: b }
}

/// Contiguous split into `b` near-equal blocks.
pub fn batch_split<T>(values: &[T], b: usize) -> Vec<&[T]> {
    let n = values.len();
    let base = n / b;
    let extra = n % b;
    let mut out = Vec::with_capacity(b);
    let mut start = 0;
    for k in 0..b {
        let len = base + usize::from(k < extra);
        out.push(&values[start..start + len]);
        start += len;
    }
    out
}

/// Entrywise mean of symmetric matrices.
pub fn mean_matrix(samples: &[SymMat]) -> Result<SymMat> {
    let first = samples.first().ok_or_else(|| Error::InsufficientData("no samples".into()))?;
    let mut acc = SymMat::zeros(first.dim());
    for s in samples {
        acc += s;
    }
    Ok(acc.scale(1.0 / samples.len() as f64))
}

/// Result of a noisy Loewner comparison `Â ⪯ B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoewnerCheck {
    /// `λ_min(B − Â)`.
    pub lambda_min: f64,
    /// Batch-means standard error of `λ_min`.
    pub stderr: f64,
}

impl LoewnerCheck {
    /// `λ_min ≥ −k·SE`.
    pub fn holds(&self, k: f64) -> bool {
        self.lambda_min >= -k * self.stderr
    }
}

/// Compares the sample mean of `samples` against `upper`.
pub fn loewner_below(samples: &[SymMat], upper: &SymMat, batches: usize) -> Result<LoewnerCheck> {
    let mean = mean_matrix(samples)?;
    let lambda_min = (upper - &mean).lambda_min();
    let b = batches.min(samples.len()).max(1);
    let per_batch: Vec<f64> = batch_split(samples, b)
        .into_iter()
        .map(|chunk| mean_matrix(chunk).map(|m| (upper - &m).lambda_min()))
        .collect::<Result<_>>()?;
    let stats = batch_means(&per_batch, b);
    Ok(LoewnerCheck { lambda_min, stderr: stats.stderr })
}

/// Least-squares line with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData("need at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("x values are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (se_s, se_i) = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let s2 = rss / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit { slope, intercept, slope_stderr: se_s, intercept_stderr: se_i })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// 1-Wasserstein distance between two empirical laws on ℝ, computed from
/// the sorted samples (equal sizes) or the CDF integral (general case).
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    if x.len() == y.len() {
        return Ok(x.iter().zip(&y).map(|(u, v)| (u - v).abs()).sum::<f64>() / x.len() as f64);
    }
    let mut pts: Vec<f64> = x.iter().chain(&y).copied().collect();
    pts.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    for w in pts.windows(2) {
        while i < x.len() && x[i] <= w[0] {
            i += 1;
        }
        while j < y.len() && y[j] <= w[0] {
            j += 1;
        }
        total += (i as f64 / n - j as f64 / m).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

/// Sample quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// `log Σ exp(xᵢ)` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
