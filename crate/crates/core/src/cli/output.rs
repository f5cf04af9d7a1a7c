use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "MANIFEST";
pub const PLOT_DIR: &str = "plotdata";

/// Build identification written into every result row.
pub fn fingerprint() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    match option_env!("RICCDIFF_GIT_HASH") {
        Some(h) => format!("riccdiff-{}+{h}-{profile}", env!("CARGO_PKG_VERSION")),
        None => format!("riccdiff-{}-{profile}", env!("CARGO_PKG_VERSION")),
    }
}

/// Fixed 17-significant-digit rendering.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub diverged_fraction: f64,
    pub wall_time_s: f64,
}

pub const RESULT_HEADER: [&str; 8] =
    ["experiment", "params", "estimate", "stderr", "n_paths", "diverged_fraction", "wall_time_s", "fingerprint"];

/// One point of a long-format plot series.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

/// An acceptance verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub target: String,
    pub measured: Option<f64>,
    pub pass: bool,
}

impl Verdict {
    pub fn new(id: impl Into<String>, target: impl Into<String>, measured: f64, pass: bool) -> Self {
        Verdict { id: id.into(), target: target.into(), measured: measured.is_finite().then_some(measured), pass }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.measured.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into());
        write!(f, "{} {} target {} {}", self.id, m, self.target, if self.pass { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u64,
    pub experiment: String,
    pub seed: u64,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub criteria: Vec<Verdict>,
    pub aggregates: BTreeMap<String, Option<f64>>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|v| v.pass)
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_HEADER)?;
    let fp = fingerprint();
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.params.clone(),
            fmt_f64(r.estimate),
            fmt_f64(r.stderr),
            r.n_paths.to_string(),
            fmt_f64(r.diverged_fraction),
            format!("{:.3}", r.wall_time_s),
            fp.clone(),
        ])?;
    }
    w.flush()
}

pub fn write_plot(path: &Path, points: &[PlotPoint]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "x", "y", "stderr"])?;
    for p in points {
        w.write_record([p.series.clone(), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.stderr)])?;
    }
    w.flush()
}

pub fn write_summary(path: &Path, s: &Summary) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(s).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Error raised by [`read_report`].
#[derive(Debug)]
pub enum ReportError {
    Missing { dir: PathBuf, files: Vec<&'static str> },
    Io(io::Error),
    Parse(String),
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::Missing { dir, files } => write!(
                f,
                "{} is not a result directory: missing {} (expected {RESULTS_FILE} and {SUMMARY_FILE})",
                dir.display(),
                files.join(", ")
            ),
            ReportError::Io(e) => write!(f, "{e}"),
            ReportError::Parse(e) => write!(f, "cannot parse {SUMMARY_FILE}: {e}"),
        }
    }
}

impl std::error::Error for ReportError {}

/// Loads the summary of a finished run and the verdict lines to print.
pub fn read_report(dir: &Path) -> Result<(Summary, Vec<String>), ReportError> {
    let missing: Vec<&'static str> =
        [RESULTS_FILE, SUMMARY_FILE].into_iter().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(ReportError::Missing { dir: dir.to_path_buf(), files: missing });
    }
    let text = fs::read_to_string(dir.join(SUMMARY_FILE)).map_err(ReportError::Io)?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| ReportError::Parse(e.to_string()))?;
    let mut lines = vec![format!("experiment {} (seed {}, {} paths)", summary.experiment, summary.seed, summary.n_paths)];
    if summary.criteria.is_empty() {
        lines.push("no acceptance criteria for this experiment".into());
    }
    lines.extend(summary.criteria.iter().map(|v| v.to_string()));
    Ok((summary, lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn verdict_line() {
        let v = Verdict::new("bias slope", "2±0.3", 2.0034, true);
        assert_eq!(v.to_string(), "bias slope 2.00 target 2±0.3 PASS");
        let v = Verdict::new("x", "y", f64::NAN, false);
        assert_eq!(v.to_string(), "x n/a target y FAIL");
    }
}
