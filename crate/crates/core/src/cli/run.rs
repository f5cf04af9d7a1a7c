use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::dyson::{simulate_eigenvalues_from, IsotropicCoefficients};
use crate::enkf::{run_enkf, sample_stats, simulate_truth, Ensemble};
use crate::error::{Error, Result};
use crate::matcore::{log_norm, SymMat};
use crate::mc::{
    batch_means, bias_curve, det_decay_rate, estimate_moment_norm, fluctuation_curve, fluctuation_profile,
    forward_sampler, ks_distance, lyapunov_exponent, par_map, semigroup_samples, simulate_batch,
    stationarity_diagnostic, uniformity_ratio, BatchOptions, Functional,
};
use crate::riccati::{simulate_path, simulate_path_sampled, solve_fixed_point, step_grid, trace_moment_bound, Scheme};
use crate::rng::{path_rng, Purpose};

use super::config::{ExperimentConfig, ExperimentKind, Format, SCHEMA_VERSION};
use super::output::{
    write_plot, write_results, write_summary, PlotPoint, ResultRow, Summary, Verdict, MANIFEST_FILE, PLOT_DIR,
    RESULTS_FILE, SUMMARY_FILE,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CRITERION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_EPS_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
const MAX_PLOT_POINTS: usize = 2000;

/// Everything an experiment produced, in memory.
#[derive(Debug, Default)]
pub struct Collected {
    pub rows: Vec<ResultRow>,
    pub plots: BTreeMap<String, Vec<PlotPoint>>,
    pub criteria: Vec<Verdict>,
    pub aggregates: BTreeMap<String, Option<f64>>,
    pub stages: Vec<String>,
}

impl Collected {
    fn row(&mut self, cfg: &ExperimentConfig, params: String, estimate: f64, stderr: f64, n: usize, div: f64, since: Instant) {
        self.rows.push(ResultRow {
            experiment: cfg.experiment.name().into(),
            params,
            estimate,
            stderr,
            n_paths: n,
            diverged_fraction: div,
            wall_time_s: since.elapsed().as_secs_f64(),
        });
    }

    fn plot(&mut self, file: &str, series: impl Into<String>, x: f64, y: f64, stderr: f64) {
        self.plots.entry(file.into()).or_default().push(PlotPoint { series: series.into(), x, y, stderr });
    }

    fn aggregate(&mut self, key: impl Into<String>, v: f64) {
        self.aggregates.insert(key.into(), v.is_finite().then_some(v));
    }

    fn stage(&mut self, s: impl Into<String>) {
        self.stages.push(s.into());
    }
}

/// Result of [`run_experiment`].
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub directory: PathBuf,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs the configured experiment and writes its output directory. On
/// failure the rows computed so far and a MANIFEST are still written.
pub fn run_experiment(cfg: &ExperimentConfig, warnings: &[String]) -> RunOutcome {
    let dir = cfg.output.directory.clone();
    let mut col = Collected::default();
    col.stage("config");
    let res = execute(cfg, &mut col);
    let (code, error) = match &res {
        Ok(()) if col.criteria.iter().all(|v| v.pass) => (EXIT_PASS, None),
        Ok(()) => (EXIT_CRITERION, None),
        Err(e) => (exit_code_for(e), Some(e.to_string())),
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.experiment.name().into(),
        seed: cfg.run.seed,
        t: cfg.run.t,
        dt: cfg.run.dt,
        n_paths: cfg.run.n_paths,
        criteria: col.criteria.clone(),
        aggregates: col.aggregates.clone(),
        warnings: warnings.to_vec(),
    };
    match write_outputs(cfg, &dir, &mut col, &summary, error.as_deref()) {
        Ok(()) => RunOutcome { exit_code: code, directory: dir, summary: Some(summary), error },
        Err(e) => RunOutcome {
            exit_code: EXIT_USAGE,
            directory: dir,
            summary: None,
            error: Some(format!("cannot write output: {e}")),
        },
    }
}

fn write_outputs(cfg: &ExperimentConfig, dir: &Path, col: &mut Collected, summary: &Summary, error: Option<&str>) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = col.stages.clone();
    if cfg.output.formats.contains(&Format::Csv) {
        write_results(&dir.join(RESULTS_FILE), &col.rows)?;
        manifest.push(RESULTS_FILE.into());
        if !col.plots.is_empty() {
            let pd = dir.join(PLOT_DIR);
            fs::create_dir_all(&pd)?;
            for (name, pts) in &col.plots {
                write_plot(&pd.join(format!("{name}.csv")), pts)?;
                manifest.push(format!("{PLOT_DIR}/{name}.csv"));
            }
        }
    }
    if error.is_none() && cfg.output.formats.contains(&Format::Json) {
        write_summary(&dir.join(SUMMARY_FILE), summary)?;
        manifest.push(SUMMARY_FILE.into());
    }
    let mut text = manifest.join("\n");
    text.push('\n');
    if let Some(e) = error {
        text.push_str(&format!("incomplete: {e}\n"));
    }
    fs::write(dir.join(MANIFEST_FILE), text)
}

fn execute(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    match cfg.experiment {
        ExperimentKind::Simulate => simulate(cfg, col),
        ExperimentKind::Moments => moments(cfg, col),
        ExperimentKind::Bias => bias(cfg, col),
        ExperimentKind::Fluctuation => fluctuation(cfg, col),
        ExperimentKind::Semigroup => semigroup(cfg, col),
        ExperimentKind::DetDecay => det_decay(cfg, col),
        ExperimentKind::DysonCompare => dyson_compare(cfg, col),
        ExperimentKind::Enkf => enkf(cfg, col),
        ExperimentKind::Stationarity => stationarity(cfg, col),
    }
}

fn first_order(cfg: &ExperimentConfig, default: u32) -> u32 {
    cfg.run.n_orders.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
}

fn eps_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.run.eps_grid.clone().unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec())
}

fn simulate(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let path = simulate_path(&cfg.q0, cfg.run.t, cfg.run.dt, &cfg.params, cfg.run.seed)?;
    col.stage("simulation");
    let every = path.grid.len().div_ceil(MAX_PLOT_POINTS).max(1);
    for (k, (t, q)) in path.grid.iter().zip(&path.q).enumerate() {
        if k % every != 0 && k + 1 != path.grid.len() {
            continue;
        }
        col.plot("path", "trace", *t, q.trace(), 0.0);
        for (i, l) in q.eigenvalues().iter().enumerate() {
            col.plot("path", format!("lambda_{}", i + 1), *t, *l, 0.0);
        }
    }
    let last = path.q.last().expect("non-empty path");
    let div = if path.diverged_at.is_some() { 1.0 } else { 0.0 };
    col.row(cfg, format!("stat=trace;t={}", cfg.run.t), last.trace(), 0.0, 1, div, start);
    col.row(cfg, format!("stat=lambda_max;t={}", cfg.run.t), last.lambda_max(), 0.0, 1, div, start);
    col.aggregate("final_trace", last.trace());
    col.aggregate("floor_rate", path.floor_rate());
    path.check()
}

fn moments(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let orders = cfg.run.n_orders.clone().unwrap_or_else(|| vec![1, 2]);
    let sampler = forward_sampler(&cfg.params, &cfg.q0, cfg.run.dt);
    for n in orders {
        let start = Instant::now();
        let est = estimate_moment_norm(&sampler, Functional::Trace, n, cfg.run.t, cfg.run.n_paths, cfg.run.seed)?;
        col.row(cfg, format!("n={n};t={}", cfg.run.t), est.value, est.stderr, est.n_paths, est.diverged_fraction(), start);
        col.plot("moments", "trace_moment", n as f64, est.value, est.stderr);
        col.aggregate(format!("moment_n{n}"), est.value);
        match trace_moment_bound(&cfg.params, n as usize, cfg.run.t, &cfg.q0) {
            Ok(b) => {
                col.plot("moments", "bound", n as f64, b.at_t, 0.0);
                let slack = b.at_t + 3.0 * est.stderr - est.value;
                col.criteria.push(Verdict::new(
                    format!("moment bound n={n}"),
                    format!("≤ {:.4}", b.at_t),
                    est.value,
                    slack >= 0.0,
                ));
            }
            Err(Error::ThresholdExceeded(m)) => log::warn!("no trace bound at n = {n}: {m}"),
            Err(e) => return Err(e),
        }
    }
    col.stage("simulation");
    Ok(())
}

fn bias(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let grid = eps_grid(cfg);
    let curve = bias_curve(&cfg.params, &cfg.q0, cfg.run.t, &grid, cfg.run.n_paths, cfg.run.seed, cfg.run.dt)?;
    col.stage("simulation");
    let mut worst_z = f64::INFINITY;
    for p in &curve.points {
        let n = cfg.run.n_paths - p.diverged;
        col.row(cfg, format!("eps={};t={}", p.eps, cfg.run.t), p.response, p.stderr, n, p.diverged as f64 / cfg.run.n_paths as f64, start);
        col.plot("bias", "bias", p.eps, p.response, p.stderr);
        col.plot("bias", "loewner_gap", p.eps, p.loewner.lambda_min, p.loewner.stderr);
        let z = if p.loewner.stderr > 0.0 { p.loewner.lambda_min / p.loewner.stderr } else { p.loewner.lambda_min.signum() * f64::INFINITY };
        worst_z = worst_z.min(z);
    }
    let f = &curve.fit;
    col.row(cfg, "fit=slope".into(), f.slope, f.slope_stderr, cfg.run.n_paths, 0.0, start);
    col.aggregate("slope", f.slope);
    col.aggregate("slope_stderr", f.slope_stderr);
    col.aggregate("intercept", f.intercept);
    col.criteria.push(Verdict::new("bias slope", "2±0.3", f.slope, f.matches(2.0, 0.3)));
    let all_below = curve.points.iter().all(|p| p.loewner.holds(3.0));
    col.criteria.push(Verdict::new("bias loewner z", "≥ -3", worst_z, all_below));
    Ok(())
}

fn fluctuation(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let n = first_order(cfg, 2);
    let grid = eps_grid(cfg);
    let (fit, pts) = fluctuation_curve(&cfg.params, &cfg.q0, cfg.run.t, n, &grid, cfg.run.n_paths, cfg.run.seed, cfg.run.dt)?;
    col.stage("eps-scan");
    for (eps, p) in grid.iter().zip(&pts) {
        let d = p.matrix.diverged_fraction();
        col.row(cfg, format!("eps={eps};n={n};t={}", p.t), p.matrix.value, p.matrix.stderr, p.matrix.n_paths, d, start);
        col.plot("fluctuation", "matrix", *eps, p.matrix.value, p.matrix.stderr);
        col.plot("fluctuation", "spectral", *eps, p.spectral.value, p.spectral.stderr);
    }
    col.row(cfg, format!("fit=slope;n={n}"), fit.slope, fit.slope_stderr, cfg.run.n_paths, 0.0, start);
    col.aggregate("slope", fit.slope);
    col.aggregate("slope_stderr", fit.slope_stderr);
    col.criteria.push(Verdict::new("fluctuation slope", "1±0.2", fit.slope, fit.matches(1.0, 0.2)));
    if let Some(times) = &cfg.run.time_grid {
        let eps = if cfg.params.eps() > 0.0 { cfg.params.eps() } else { grid[grid.len() / 2] };
        let params = cfg.params.with_eps(eps)?;
        let prof = fluctuation_profile(&params, &cfg.q0, times, n, cfg.run.n_paths, cfg.run.seed, cfg.run.dt)?;
        col.stage("time-profile");
        for p in &prof {
            col.row(cfg, format!("eps={eps};n={n};t={}", p.t), p.matrix.value, p.matrix.stderr, p.matrix.n_paths, p.matrix.diverged_fraction(), start);
            col.plot("fluctuation_profile", "matrix", p.t, p.matrix.value, p.matrix.stderr);
        }
        let ratio = uniformity_ratio(&prof);
        col.aggregate("uniformity_ratio", ratio);
        col.criteria.push(Verdict::new("fluctuation uniformity", "≤ 1.30", ratio, ratio <= 1.3));
    }
    Ok(())
}

fn semigroup(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let samples = semigroup_samples(&cfg.params, &cfg.q0, cfg.run.t, cfg.run.dt, cfg.run.n_paths, cfg.run.seed)?;
    col.stage("simulation");
    let p_inf = solve_fixed_point(&cfg.params.with_eps(0.0)?)?;
    let closed = cfg.params.a() - p_inf.to_dense() * cfg.params.s().to_dense();
    let mu = log_norm(&closed)?;
    let finals: Vec<_> = samples.iter().map(|s| s.e.clone()).collect();
    let stats = lyapunov_exponent(&finals, cfg.run.t, mu / 2.0)?;
    let liouville = samples
        .iter()
        .map(|s| {
            let ld = s.e.clone().determinant().abs().ln();
            (ld - s.trace_integral).abs() / s.trace_integral.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    let b = batch_means(&stats.exponents, crate::mc::DEFAULT_BATCHES);
    col.row(cfg, format!("stat=lyapunov_mean;t={}", cfg.run.t), b.mean, b.stderr, samples.len(), 0.0, start);
    col.row(cfg, format!("stat=fraction_below;t={}", cfg.run.t), stats.fraction_below, 0.0, samples.len(), 0.0, start);
    col.row(cfg, "stat=liouville_residual".into(), liouville, 0.0, samples.len(), 0.0, start);
    for (q, v) in [(0.05, stats.q05), (0.5, stats.median), (0.95, stats.q95)] {
        col.plot("lyapunov_quantiles", "exponent", q, v, 0.0);
    }
    col.aggregate("mu_closed_loop", mu);
    col.aggregate("threshold", stats.threshold);
    col.aggregate("median", stats.median);
    col.criteria.push(Verdict::new("semigroup fraction", "≥ 0.95", stats.fraction_below, stats.fraction_below >= 0.95));
    col.criteria.push(Verdict::new("liouville residual", "≤ 1e-6", liouville, liouville <= 1e-6));
    Ok(())
}

fn det_decay(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let n = first_order(cfg, 2);
    let times = cfg.run.time_grid.clone().unwrap_or_else(|| vec![cfg.run.t]);
    let opts = BatchOptions { track_logdet: true, auto_halve: false, ..BatchOptions::default() };
    let batch = simulate_batch(&cfg.params, &cfg.q0, &times, cfg.run.dt, cfg.run.n_paths, cfg.run.seed, opts)?;
    col.stage("simulation");
    let div = batch.diverged as f64 / cfg.run.n_paths as f64;
    let mut last = None;
    for (k, &t) in times.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let ld: Vec<f64> = batch.logdets.iter().map(|l| l[k]).collect();
        let d = det_decay_rate(&ld, n, t, &cfg.params)?;
        col.row(cfg, format!("n={n};t={t}"), d.rate, d.stderr, d.n_paths, div, start);
        col.plot("det_decay", "rate", t, d.rate, d.stderr);
        col.plot("det_decay", "bound", t, d.bound, 0.0);
        last = Some(d);
    }
    let d = last.ok_or_else(|| Error::InvalidArgument("time grid has no positive time".into()))?;
    col.aggregate("rate", d.rate);
    col.aggregate("bound", d.bound);
    col.criteria.push(Verdict::new(
        "det decay rate",
        format!("≥ {:.4}", d.bound),
        d.rate,
        d.rate >= d.bound - 3.0 * d.stderr,
    ));
    Ok(())
}

fn dyson_compare(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let p = &cfg.params;
    let (a, rr, ss) = (p.a()[(0, 0)], p.r().get(0, 0), p.s().get(0, 0));
    let c = IsotropicCoefficients { a, rr, ss, uu: rr, vv: p.kappa().as_f64() * ss };
    let t = cfg.run.t;
    let opts = BatchOptions { auto_halve: false, ..BatchOptions::default() };
    let batch = simulate_batch(p, &cfg.q0, &[t], cfg.run.dt, cfg.run.n_paths, cfg.run.seed, opts)?;
    col.stage("matrix-simulation");
    let lambda0 = cfg.q0.eigenvalues();
    let mut lambda0 = lambda0;
    lambda0.sort_by(|x, y| y.total_cmp(x));
    let eig = par_map(cfg.run.n_paths, |i| {
        let mut rng = path_rng(cfg.run.seed, i as u64, Purpose::EigenPath);
        simulate_eigenvalues_from(&c, &lambda0, p.eps(), t, cfg.run.dt, &mut rng).map(|e| e.final_lambdas().to_vec())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    col.stage("eigenvalue-simulation");
    let r = p.dim();
    let mut worst: f64 = 0.0;
    for i in 0..r {
        let m: Vec<f64> = batch
            .states
            .iter()
            .map(|q| {
                let mut l = q[0].eigenvalues();
                l.sort_by(|x, y| y.total_cmp(x));
                l[i]
            })
            .collect();
        let e: Vec<f64> = eig.iter().map(|l| l[i]).collect();
        let ks = ks_distance(&m, &e)?;
        worst = worst.max(ks);
        col.row(cfg, format!("stat=ks;index={};t={t}", i + 1), ks, 0.0, m.len(), batch.diverged as f64 / cfg.run.n_paths as f64, start);
        col.plot("dyson_ks", "ks", (i + 1) as f64, ks, 0.0);
        col.aggregate(format!("ks_lambda{}", i + 1), ks);
    }
    col.aggregate("ks_max", worst);
    col.criteria.push(Verdict::new("dyson ks", "≤ 0.05", worst, worst <= 0.05));
    Ok(())
}

fn enkf(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let f = cfg.filter.as_ref().expect("validated enkf config");
    let times = cfg.run.time_grid.clone().unwrap_or_else(|| vec![cfg.run.t]);
    let (steps, h) = step_grid(cfg.run.t, cfg.run.dt);
    let records = par_map(cfg.run.n_paths, |i| -> Result<Vec<f64>> {
        let mut truth_rng = path_rng(cfg.run.seed, i as u64, Purpose::Truth);
        let mut ens_rng = path_rng(cfg.run.seed, i as u64, Purpose::Ensemble);
        let x0 = f.m0.clone();
        let truth = simulate_truth(&f.model, &x0, cfg.run.t, h, &mut truth_rng)?;
        let ens = Ensemble::gaussian(f.n, &f.m0, &f.p0, f.kind, f.varpi, &mut ens_rng)?;
        let rec = run_enkf(&f.model, ens, &truth, 1, &mut ens_rng)?;
        Ok(times
            .iter()
            .map(|&t| {
                let k = ((t / h).round() as usize).min(steps);
                rec.cov[k].trace()
            })
            .collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    col.stage("ensemble");
    // Riccati side starts from the law of the initial sample covariance.
    let starts = par_map(cfg.run.n_paths, |i| -> Result<SymMat> {
        let mut rng = path_rng(cfg.run.seed, i as u64, Purpose::InitialState);
        let ens = Ensemble::gaussian(f.n, &f.m0, &f.p0, f.kind, f.varpi, &mut rng)?;
        Ok(sample_stats(&ens).1)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ric = par_map(cfg.run.n_paths, |i| -> Result<Option<Vec<f64>>> {
        let mut rng = path_rng(cfg.run.seed, i as u64, Purpose::Comparison);
        let p = simulate_path_sampled(&starts[i], &times, h, &cfg.params, false, Scheme::Matrix, &mut rng)?;
        Ok(p.diverged_at.is_none().then(|| p.q.iter().map(|q| q.trace()).collect()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    col.stage("riccati");
    let ric: Vec<Vec<f64>> = ric.into_iter().flatten().collect();
    let div = 1.0 - ric.len() as f64 / cfg.run.n_paths as f64;
    let mut all = true;
    let mut worst: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        for (m, name) in [(1, "mean"), (2, "second_moment")] {
            let e: Vec<f64> = records.iter().map(|v| v[k].powi(m)).collect();
            let r: Vec<f64> = ric.iter().map(|v| v[k].powi(m)).collect();
            let be = batch_means(&e, crate::mc::DEFAULT_BATCHES);
            let br = batch_means(&r, crate::mc::DEFAULT_BATCHES);
            let se = (be.stderr.powi(2) + br.stderr.powi(2)).sqrt();
            let z = if se > 0.0 { (be.mean - br.mean).abs() / se } else { 0.0 };
            worst = worst.max(z);
            all &= z <= 3.0;
            col.row(cfg, format!("side=enkf;stat={name};t={t}"), be.mean, be.stderr, e.len(), 0.0, start);
            col.row(cfg, format!("side=riccati;stat={name};t={t}"), br.mean, br.stderr, r.len(), div, start);
            col.plot("enkf_trace", format!("enkf_{name}"), t, be.mean, be.stderr);
            col.plot("enkf_trace", format!("riccati_{name}"), t, br.mean, br.stderr);
        }
    }
    col.aggregate("max_z", worst);
    col.criteria.push(Verdict::new("enkf moment match z", "≤ 3", worst, all));
    Ok(())
}

fn stationarity(cfg: &ExperimentConfig, col: &mut Collected) -> Result<()> {
    let start = Instant::now();
    let times = cfg.run.time_grid.clone().unwrap_or_else(|| {
        let n = cfg.run.t.floor() as usize;
        let mut v: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        if v.last() != Some(&cfg.run.t) {
            v.push(cfg.run.t);
        }
        v
    });
    let alt = cfg.q0_alt.as_ref().expect("validated stationarity config");
    let curve = stationarity_diagnostic(&cfg.params, &cfg.q0, alt, &times, cfg.run.dt, cfg.run.n_paths, cfg.run.seed)?;
    col.stage("simulation");
    for (k, &t) in curve.times.iter().enumerate() {
        col.row(cfg, format!("stat=w1;t={t}"), curve.distance[k], curve.stderr[k], cfg.run.n_paths, 0.0, start);
        col.plot("stationarity", "w1", t, curve.distance[k], curve.stderr[k]);
    }
    let last = *curve.distance.last().expect("non-empty time grid");
    col.aggregate("w1_final", last);
    col.aggregate("rate", curve.rate);
    col.criteria.push(Verdict::new("stationarity w1", "≤ 0.05", last, last <= 0.05));
    let mono = curve.nonincreasing_after(1.0, 2.0);
    col.criteria.push(Verdict::new("stationarity monotone", "1", if mono { 1.0 } else { 0.0 }, mono));
    Ok(())
}
