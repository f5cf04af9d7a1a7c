use std::fmt;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::enkf::{riccati_correspondence, EnkfType, FilterModel};
use crate::matcore::SymMat;
use crate::riccati::{thresholds, Kappa, ModelParams};

/// The only accepted `schema_version`.
pub const SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_N_PATHS: usize = 10_000;
pub const DEFAULT_T: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Simulate,
    Moments,
    Bias,
    Fluctuation,
    Semigroup,
    DetDecay,
    DysonCompare,
    Enkf,
    Stationarity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Simulate,
        ExperimentKind::Moments,
        ExperimentKind::Bias,
        ExperimentKind::Fluctuation,
        ExperimentKind::Semigroup,
        ExperimentKind::DetDecay,
        ExperimentKind::DysonCompare,
        ExperimentKind::Enkf,
        ExperimentKind::Stationarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Bias => "bias",
            ExperimentKind::Fluctuation => "fluctuation",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::DetDecay => "det-decay",
            ExperimentKind::DysonCompare => "dyson-compare",
            ExperimentKind::Enkf => "enkf",
            ExperimentKind::Stationarity => "stationarity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Filter section of an `enkf` configuration.
#[derive(Debug, Clone)]
pub struct FilterSpec {
    pub model: FilterModel,
    pub n: usize,
    pub kind: EnkfType,
    pub varpi: f64,
    pub m0: DVector<f64>,
    pub p0: SymMat,
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub eps_grid: Option<Vec<f64>>,
    pub n_orders: Option<Vec<u32>>,
    pub time_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub schema_version: u64,
    pub experiment: ExperimentKind,
    /// Riccati model; for `enkf` the correspondence model of the filter.
    pub params: ModelParams,
    pub q0: SymMat,
    pub q0_alt: Option<SymMat>,
    pub filter: Option<FilterSpec>,
    pub run: RunSpec,
    pub output: OutputSpec,
}

/// All schema violations found in a document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// A parsed configuration with non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

const TOP_KEYS: &[&str] = &["schema_version", "experiment", "model", "run", "output"];
const MODEL_KEYS: &[&str] = &["dim", "A", "R", "S", "kappa", "varpi", "eps", "Q0", "Q0_alt"];
const FILTER_KEYS: &[&str] = &["dim", "A", "B", "R1", "R2", "N", "type", "varpi", "m0", "P0"];
const RUN_KEYS: &[&str] = &["T", "dt", "n_paths", "seed", "eps_grid", "n_orders", "time_grid"];
const OUTPUT_KEYS: &[&str] = &["directory", "formats"];

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn err(&mut self, path: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn object<'a>(&mut self, v: Option<&'a Value>, path: &str, allowed: &[&str], required: bool) -> Option<&'a Map<String, Value>> {
        match v {
            None => {
                if required {
                    self.err(path, "missing required section");
                }
                None
            }
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.err(&join(path, k), format!("unknown key (allowed: {})", allowed.join(", ")));
                    }
                }
                Some(m)
            }
            Some(_) => {
                self.err(path, "must be an object");
                None
            }
        }
    }

    fn number(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let v = m.get(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(&join(path, key), "must be a finite number");
                None
            }
        }
    }

    fn positive(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let x = self.number(m, path, key)?;
        if x <= 0.0 {
            self.err(&join(path, key), format!("must be > 0 (got {x})"));
            return None;
        }
        Some(x)
    }

    fn non_negative(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let x = self.number(m, path, key)?;
        if x < 0.0 {
            self.err(&join(path, key), format!("must be ≥ 0 (got {x})"));
            return None;
        }
        Some(x)
    }

    fn integer(&mut self, m: &Map<String, Value>, path: &str, key: &str, min: u64) -> Option<u64> {
        let v = m.get(key)?;
        match v.as_u64() {
            Some(x) if x >= min => Some(x),
            Some(x) => {
                self.err(&join(path, key), format!("must be an integer ≥ {min} (got {x})"));
                None
            }
            None => {
                self.err(&join(path, key), format!("must be an integer ≥ {min}"));
                None
            }
        }
    }

    fn number_list(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<Vec<f64>> {
        let v = m.get(key)?;
        let p = join(path, key);
        let Some(arr) = v.as_array() else {
            self.err(&p, "must be an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, x) in arr.iter().enumerate() {
            match x.as_f64() {
                Some(y) if y.is_finite() => out.push(y),
                _ => {
                    self.err(&format!("{p}[{i}]"), "must be a finite number");
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.err(&p, "must not be empty");
            return None;
        }
        Some(out)
    }

    /// Number `c` (meaning `c·I`) or an array of rows.
    fn matrix(&mut self, m: &Map<String, Value>, path: &str, key: &str, dim: usize) -> Option<DMatrix<f64>> {
        let v = m.get(key)?;
        let p = join(path, key);
        if let Some(c) = v.as_f64() {
            if !c.is_finite() {
                self.err(&p, "must be finite");
                return None;
            }
            return Some(DMatrix::identity(dim, dim) * c);
        }
        let Some(rows) = v.as_array() else {
            self.err(&p, "must be a number or an array of rows");
            return None;
        };
        let mut data = Vec::new();
        let mut ncols = None;
        for (i, row) in rows.iter().enumerate() {
            let Some(row) = row.as_array() else {
                self.err(&format!("{p}[{i}]"), "must be an array of numbers");
                return None;
            };
            if *ncols.get_or_insert(row.len()) != row.len() {
                self.err(&p, "rows have different lengths");
                return None;
            }
            for x in row {
                match x.as_f64() {
                    Some(y) if y.is_finite() => data.push(y),
                    _ => {
                        self.err(&format!("{p}[{i}]"), "entries must be finite numbers");
                        return None;
                    }
                }
            }
        }
        let nrows = rows.len();
        let ncols = ncols.unwrap_or(0);
        if nrows == 0 || ncols == 0 {
            self.err(&p, "must not be empty");
            return None;
        }
        Some(DMatrix::from_row_slice(nrows, ncols, &data))
    }

    fn square(&mut self, m: &Map<String, Value>, path: &str, key: &str, dim: usize) -> Option<DMatrix<f64>> {
        let x = self.matrix(m, path, key, dim)?;
        if x.nrows() != dim || x.ncols() != dim {
            self.err(&join(path, key), format!("must be {dim}×{dim} (got {}×{})", x.nrows(), x.ncols()));
            return None;
        }
        Some(x)
    }

    fn psd(&mut self, m: &Map<String, Value>, path: &str, key: &str, dim: usize) -> Option<SymMat> {
        let x = self.square(m, path, key, dim)?;
        let p = join(path, key);
        let s = match SymMat::from_dense(&x) {
            Ok(s) => s,
            Err(_) => {
                self.err(&p, "must be symmetric");
                return None;
            }
        };
        if !s.is_psd(crate::matcore::tol_psd(&s)) {
            self.err(&p, format!("must be positive semidefinite (smallest eigenvalue {:.3e})", s.lambda_min()));
            return None;
        }
        Some(s)
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Dimension: explicit `dim`, else the size of the first array-valued
/// matrix among `keys`, else 1.
fn infer_dim(ck: &mut Checker, m: &Map<String, Value>, path: &str, keys: &[&str]) -> usize {
    if m.contains_key("dim") {
        return ck.integer(m, path, "dim", 1).map(|d| d as usize).unwrap_or(1);
    }
    for k in keys {
        if let Some(Value::Array(rows)) = m.get(*k) {
            return rows.len().max(1);
        }
    }
    1
}

fn parse_model(ck: &mut Checker, m: &Map<String, Value>) -> Option<(ModelParams, SymMat, Option<SymMat>)> {
    let path = "model";
    let dim = infer_dim(ck, m, path, &["A", "R", "S", "Q0"]);
    for k in ["A", "R", "S"] {
        if !m.contains_key(k) {
            ck.err(&join(path, k), "missing required key");
        }
    }
    let a = ck.square(m, path, "A", dim);
    let r = ck.psd(m, path, "R", dim);
    let s = ck.psd(m, path, "S", dim);
    let kappa = match m.get("kappa") {
        None => Some(Kappa::One),
        Some(v) => match v.as_i64().map(Kappa::from_int) {
            Some(Ok(k)) => Some(k),
            _ => {
                ck.err("model.kappa", "must be 0 or 1");
                None
            }
        },
    };
    let varpi = if m.contains_key("varpi") { ck.non_negative(m, path, "varpi") } else { Some(0.0) };
    let eps = if m.contains_key("eps") { ck.non_negative(m, path, "eps") } else { Some(0.0) };
    let q0 = if m.contains_key("Q0") { ck.psd(m, path, "Q0", dim) } else { Some(SymMat::identity(dim)) };
    let q0_alt = if m.contains_key("Q0_alt") { ck.psd(m, path, "Q0_alt", dim).map(Some) } else { Some(None) };
    let (a, r, s, kappa, varpi, eps, q0, q0_alt) = (a?, r?, s?, kappa?, varpi?, eps?, q0?, q0_alt?);
    match ModelParams::new(a, r, s, kappa, varpi, eps) {
        Ok(p) => Some((p, q0, q0_alt)),
        Err(e) => {
            ck.err(path, e);
            None
        }
    }
}

fn parse_filter(ck: &mut Checker, m: &Map<String, Value>) -> Option<(FilterSpec, ModelParams)> {
    let path = "model";
    let dim = infer_dim(ck, m, path, &["A", "R1", "P0"]);
    for k in ["A", "B", "R1", "R2", "N", "type"] {
        if !m.contains_key(k) {
            ck.err(&join(path, k), "missing required key");
        }
    }
    let a = ck.square(m, path, "A", dim);
    let b = ck.matrix(m, path, "B", dim);
    let obs = b.as_ref().map(|b| b.nrows()).unwrap_or(dim);
    if let Some(b) = &b {
        if b.ncols() != dim {
            ck.err("model.B", format!("must have {dim} columns (got {})", b.ncols()));
        }
    }
    let r1 = ck.psd(m, path, "R1", dim);
    let r2 = ck.psd(m, path, "R2", obs);
    let n = ck.integer(m, path, "N", 1).map(|n| n as usize);
    let kind = match m.get("type").and_then(|v| v.as_i64()) {
        Some(k) => match EnkfType::from_int(k) {
            Ok(t) => Some(t),
            Err(_) => {
                ck.err("model.type", "must be 1 or 2");
                None
            }
        },
        None => {
            if m.contains_key("type") {
                ck.err("model.type", "must be 1 or 2");
            }
            None
        }
    };
    let varpi = if m.contains_key("varpi") { ck.non_negative(m, path, "varpi") } else { Some(0.0) };
    let m0 = match m.get("m0") {
        None => Some(DVector::zeros(dim)),
        Some(_) => ck.number_list(m, path, "m0").and_then(|v| {
            if v.len() == dim {
                Some(DVector::from_vec(v))
            } else {
                ck.err("model.m0", format!("must have {dim} entries"));
                None
            }
        }),
    };
    let p0 = if m.contains_key("P0") { ck.psd(m, path, "P0", dim) } else { Some(SymMat::identity(dim)) };
    let (a, b, r1, r2, n, kind, varpi, m0, p0) = (a?, b?, r1?, r2?, n?, kind?, varpi?, m0?, p0?);
    let model = match FilterModel::new(a, b, r1, r2) {
        Ok(f) => f,
        Err(e) => {
            ck.err(path, e);
            return None;
        }
    };
    let params = match riccati_correspondence(&model, kind, n, varpi) {
        Ok(p) => p,
        Err(e) => {
            ck.err(path, e);
            return None;
        }
    };
    Some((FilterSpec { model, n, kind, varpi, m0, p0 }, params))
}

fn parse_run(ck: &mut Checker, m: Option<&Map<String, Value>>) -> Option<RunSpec> {
    let empty = Map::new();
    let m = m.unwrap_or(&empty);
    let path = "run";
    let t = if m.contains_key("T") { ck.positive(m, path, "T") } else { Some(DEFAULT_T) };
    let dt = if m.contains_key("dt") { ck.positive(m, path, "dt") } else { Some(DEFAULT_DT) };
    let n_paths = if m.contains_key("n_paths") { ck.integer(m, path, "n_paths", 1).map(|x| x as usize) } else { Some(DEFAULT_N_PATHS) };
    let seed = if m.contains_key("seed") { ck.integer(m, path, "seed", 0) } else { Some(0) };
    let eps_grid = match m.get("eps_grid") {
        None => Some(None),
        Some(_) => ck.number_list(m, path, "eps_grid").and_then(|g| {
            if g.iter().any(|e| *e <= 0.0) || g.windows(2).any(|w| w[1] <= w[0]) {
                ck.err("run.eps_grid", "must be positive and strictly increasing");
                None
            } else {
                Some(Some(g))
            }
        }),
    };
    let n_orders = match m.get("n_orders") {
        None => Some(None),
        Some(v) => match v.as_array() {
            Some(arr) if !arr.is_empty() && arr.iter().all(|x| x.as_u64().is_some_and(|n| (1..=64).contains(&n))) => {
                Some(Some(arr.iter().map(|x| x.as_u64().unwrap() as u32).collect()))
            }
            _ => {
                ck.err("run.n_orders", "must be a non-empty array of integers in [1, 64]");
                None
            }
        },
    };
    let time_grid = match m.get("time_grid") {
        None => Some(None),
        Some(_) => ck.number_list(m, path, "time_grid").and_then(|g| {
            if g.iter().any(|e| *e < 0.0) || g.windows(2).any(|w| w[1] <= w[0]) {
                ck.err("run.time_grid", "must be non-negative and strictly increasing");
                None
            } else {
                Some(Some(g))
            }
        }),
    };
    if let (Some(t), Some(dt)) = (t, dt) {
        if dt > t {
            ck.err("run.dt", format!("must not exceed T = {t} (got {dt})"));
        }
    }
    Some(RunSpec { t: t?, dt: dt?, n_paths: n_paths?, seed: seed?, eps_grid: eps_grid?, n_orders: n_orders?, time_grid: time_grid? })
}

fn parse_output(ck: &mut Checker, m: Option<&Map<String, Value>>) -> Option<OutputSpec> {
    let Some(m) = m else {
        return Some(OutputSpec { directory: PathBuf::from("riccdiff-out"), formats: vec![Format::Csv, Format::Json] });
    };
    let directory = match m.get("directory") {
        None => Some(PathBuf::from("riccdiff-out")),
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(_) => {
            ck.err("output.directory", "must be a non-empty string");
            None
        }
    };
    let formats = match m.get("formats") {
        None => Some(vec![Format::Csv, Format::Json]),
        Some(Value::Array(a)) if !a.is_empty() => {
            let mut out = Vec::new();
            let mut ok = true;
            for f in a {
                match f.as_str() {
                    Some("csv") => out.push(Format::Csv),
                    Some("json") => out.push(Format::Json),
                    _ => {
                        ck.err("output.formats", "entries must be \"csv\" or \"json\"");
                        ok = false;
                    }
                }
            }
            ok.then_some(out)
        }
        Some(_) => {
            ck.err("output.formats", "must be a non-empty subset of [\"csv\", \"json\"]");
            None
        }
    };
    Some(OutputSpec { directory: directory?, formats: formats? })
}

fn experiment_checks(ck: &mut Checker, cfg: &ExperimentConfig) {
    let run = &cfg.run;
    match cfg.experiment {
        ExperimentKind::Moments | ExperimentKind::Bias | ExperimentKind::Fluctuation | ExperimentKind::DetDecay => {
            if run.n_paths < 100 {
                ck.err("run.n_paths", format!("must be ≥ 100 for {} (got {})", cfg.experiment, run.n_paths));
            }
        }
        ExperimentKind::Stationarity => {
            if cfg.q0_alt.is_none() {
                ck.err("model.Q0_alt", format!("required for {}", cfg.experiment));
            }
            for (name, q) in [("Q0", Some(&cfg.q0)), ("Q0_alt", cfg.q0_alt.as_ref())] {
                if let Some(q) = q {
                    if q.lambda_min() <= 0.0 {
                        ck.err(&format!("model.{name}"), "must be positive definite");
                    }
                }
            }
        }
        ExperimentKind::DysonCompare => {
            let p = &cfg.params;
            let iso = |m: &DMatrix<f64>| {
                let c = m[(0, 0)];
                (m - DMatrix::identity(m.nrows(), m.ncols()) * c).amax() == 0.0
            };
            if !(iso(p.a()) && iso(&p.r().to_dense()) && iso(&p.s().to_dense())) || p.varpi() != 0.0 {
                ck.err("model", "dyson-compare needs A, R, S multiples of the identity and varpi = 0");
            }
            let l = cfg.q0.eigenvalues();
            if l.windows(2).any(|w| w[0] - w[1] <= 0.0) || l.last().is_some_and(|x| *x <= 0.0) {
                ck.err("model.Q0", "needs distinct positive eigenvalues");
            }
        }
        _ => {}
    }
    if let Some(tg) = &run.time_grid {
        if tg.last().is_some_and(|t| *t > run.t) {
            ck.err("run.time_grid", format!("entries must not exceed T = {}", run.t));
        }
    }
    if let Some(g) = &run.eps_grid {
        if g.len() < 4 && matches!(cfg.experiment, ExperimentKind::Bias | ExperimentKind::Fluctuation) {
            ck.err("run.eps_grid", "needs at least four points for a scaling fit");
        }
    }
}

fn threshold_warnings(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    let p = &cfg.params;
    if p.kappa() != Kappa::One {
        return out;
    }
    let mut check = |eps: f64| {
        if let Ok(th) = thresholds(&p.with_eps(eps).unwrap_or_else(|_| p.clone()), 1) {
            if !th.eps0.admits(eps) {
                out.push(format!("ε exceeds ε₀ = {:?} (ε = {eps})", th.eps0.value()));
            }
        }
        if let Some(orders) = &cfg.run.n_orders {
            let n = *orders.iter().max().unwrap() as usize;
            if let Ok(th) = thresholds(p, n) {
                if !th.eps_n_v.admits(eps) {
                    out.push(format!("ε exceeds ε_{n}(V) = {:?} (ε = {eps})", th.eps_n_v.value()));
                }
            }
        }
    };
    match &cfg.run.eps_grid {
        Some(g) if matches!(cfg.experiment, ExperimentKind::Bias | ExperimentKind::Fluctuation) => {
            g.iter().for_each(|&e| check(e));
        }
        _ => check(p.eps()),
    }
    out
}

/// Parses and validates a JSON configuration, collecting every violation.
pub fn parse_config(text: &str) -> Result<Parsed, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError { violations: vec![format!("malformed JSON: {e}")] })?;
    let mut ck = Checker { errors: Vec::new() };
    let Some(top) = ck.object(Some(&root), "", TOP_KEYS, true) else {
        return Err(ConfigError { violations: ck.errors });
    };
    let version = match top.get("schema_version") {
        None => {
            ck.err("schema_version", "missing required key");
            None
        }
        Some(v) => match v.as_u64() {
            Some(SCHEMA_VERSION) => Some(SCHEMA_VERSION),
            _ => {
                ck.err("schema_version", format!("must be exactly {SCHEMA_VERSION} (got {v})"));
                None
            }
        },
    };
    let experiment = match top.get("experiment") {
        None => {
            ck.err("experiment", "missing required key");
            None
        }
        Some(v) => match v.as_str().and_then(ExperimentKind::from_name) {
            Some(k) => Some(k),
            None => {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                ck.err("experiment", format!("must be one of {} (got {v})", names.join(", ")));
                None
            }
        },
    };
    let is_enkf = experiment == Some(ExperimentKind::Enkf);
    let model_keys = if is_enkf { FILTER_KEYS } else { MODEL_KEYS };
    let model = ck.object(top.get("model"), "model", model_keys, true);
    let run_obj = ck.object(top.get("run"), "run", RUN_KEYS, false);
    let out_obj = ck.object(top.get("output"), "output", OUTPUT_KEYS, false);

    let (params, q0, q0_alt, filter) = match model {
        Some(m) if is_enkf => match parse_filter(&mut ck, m) {
            Some((f, p)) => {
                let dim = p.dim();
                (Some(p), Some(SymMat::zeros(dim)), None, Some(f))
            }
            None => (None, None, None, None),
        },
        Some(m) => match parse_model(&mut ck, m) {
            Some((p, q0, alt)) => (Some(p), Some(q0), alt, None),
            None => (None, None, None, None),
        },
        None => (None, None, None, None),
    };
    let run = parse_run(&mut ck, run_obj);
    let output = parse_output(&mut ck, out_obj);

    match (version, experiment, params, q0, run, output) {
        (Some(schema_version), Some(experiment), Some(params), Some(q0), Some(run), Some(output)) if ck.errors.is_empty() => {
            let config = ExperimentConfig { schema_version, experiment, params, q0, q0_alt, filter, run, output };
            experiment_checks(&mut ck, &config);
            if !ck.errors.is_empty() {
                return Err(ConfigError { violations: ck.errors });
            }
            let warnings = threshold_warnings(&config);
            Ok(Parsed { config, warnings })
        }
        _ => {
            if ck.errors.is_empty() {
                ck.errors.push("configuration incomplete".into());
            }
            Err(ConfigError { violations: ck.errors })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scalar_simulate() {
        let p = parse_config(r#"{"schema_version":1,"experiment":"simulate","model":{"A":1,"R":1,"S":1,"eps":0.1}}"#).unwrap();
        assert_eq!(p.config.run.dt, 1e-3);
        assert_eq!(p.config.run.n_paths, 10_000);
        assert_eq!(p.config.params.dim(), 1);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn negative_dt_names_field() {
        let e = parse_config(r#"{"schema_version":1,"experiment":"simulate","model":{"A":1,"R":1,"S":1},"run":{"dt":-0.01}}"#)
            .unwrap_err();
        assert!(e.violations.iter().any(|v| v.starts_with("run.dt") && v.contains("> 0")), "{e}");
    }

    #[test]
    fn all_violations_reported() {
        let e = parse_config(
            r#"{"schema_version":2,"experiment":"nope","model":{"A":1,"R":-1,"S":1,"foo":3},"run":{"dt":0,"n_paths":-4}}"#,
        )
        .unwrap_err();
        let joined = e.violations.join("\n");
        for needle in ["schema_version", "experiment", "model.foo", "model.R", "run.dt", "run.n_paths"] {
            assert!(joined.contains(needle), "missing {needle} in\n{joined}");
        }
    }

    #[test]
    fn eps0_warning_value() {
        let p = parse_config(
            r#"{"schema_version":1,"experiment":"simulate","model":{"dim":3,"A":0,"R":1,"S":1,"kappa":1,"eps":2,"varpi":0}}"#,
        )
        .unwrap();
        assert!(p.warnings.iter().any(|w| w.starts_with("ε exceeds ε₀ = 1.0")), "{:?}", p.warnings);
    }

    #[test]
    fn enkf_section() {
        let p = parse_config(
            r#"{"schema_version":1,"experiment":"enkf","model":{"A":[[-1,0],[0,-2]],"B":[[1,0]],"R1":1,"R2":[[1]],"N":100,"type":2}}"#,
        )
        .unwrap();
        let f = p.config.filter.unwrap();
        assert_eq!(f.n, 100);
        assert!((p.config.params.eps() - 0.2).abs() < 1e-15);
        let e = parse_config(r#"{"schema_version":1,"experiment":"enkf","model":{"A":1,"R":1,"S":1}}"#).unwrap_err();
        assert!(e.violations.iter().any(|v| v.starts_with("model.R:")));
    }

    #[test]
    fn malformed_json() {
        let e = parse_config("{not json").unwrap_err();
        assert!(e.violations[0].starts_with("malformed JSON"));
    }
}
