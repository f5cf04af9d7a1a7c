//! Experiment driver behind the `riccdiff` binary.
//!
//! `riccdiff <experiment> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]`
//! runs one experiment; `riccdiff report <dir>` prints the verdict table of a
//! finished run. Exit codes: 0 pass, 1 criterion failure, 2 usage or
//! configuration error, 3 numerical failure.

mod config;
mod output;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{
    parse_config, ConfigError, ExperimentConfig, ExperimentKind, FilterSpec, Format, OutputSpec, Parsed, RunSpec,
    DEFAULT_DT, DEFAULT_N_PATHS, DEFAULT_T, SCHEMA_VERSION,
};
pub use output::{
    fingerprint, fmt_f64, read_report, write_plot, write_results, write_summary, PlotPoint, ReportError, ResultRow,
    Summary, Verdict, MANIFEST_FILE, PLOT_DIR, RESULTS_FILE, RESULT_HEADER, SUMMARY_FILE,
};
pub use run::{exit_code_for, run_experiment, RunOutcome, EXIT_CRITERION, EXIT_NUMERICAL, EXIT_PASS, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "riccdiff", version, about = "Matrix Riccati diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "RICCDIFF_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single sample path.
    Simulate(RunArgs),
    /// Trace moments against their bounds.
    Moments(RunArgs),
    /// Bias scaling in ε.
    Bias(RunArgs),
    /// Fluctuation scaling in ε.
    Fluctuation(RunArgs),
    /// Exponential decay of the stochastic semigroup.
    Semigroup(RunArgs),
    /// Decay rate of the determinant.
    DetDecay(RunArgs),
    /// Eigenvalue SDE against the matrix simulation.
    DysonCompare(RunArgs),
    /// Ensemble Kalman–Bucy filter against the Riccati diffusion.
    Enkf(RunArgs),
    /// Contraction towards the invariant law.
    Stationarity(RunArgs),
    /// Prints the verdict table of a result directory.
    Report { dir: PathBuf },
}

impl Command {
    fn split(self) -> Result<(ExperimentKind, RunArgs), PathBuf> {
        Ok(match self {
            Command::Simulate(a) => (ExperimentKind::Simulate, a),
            Command::Moments(a) => (ExperimentKind::Moments, a),
            Command::Bias(a) => (ExperimentKind::Bias, a),
            Command::Fluctuation(a) => (ExperimentKind::Fluctuation, a),
            Command::Semigroup(a) => (ExperimentKind::Semigroup, a),
            Command::DetDecay(a) => (ExperimentKind::DetDecay, a),
            Command::DysonCompare(a) => (ExperimentKind::DysonCompare, a),
            Command::Enkf(a) => (ExperimentKind::Enkf, a),
            Command::Stationarity(a) => (ExperimentKind::Stationarity, a),
            Command::Report { dir } => return Err(dir),
        })
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
        }
    };
    match cli.command.split() {
        Err(dir) => report(&dir),
        Ok((kind, args)) => run(kind, args),
    }
}

fn report(dir: &std::path::Path) -> i32 {
    match read_report(dir) {
        Ok((summary, lines)) => {
            for l in lines {
                println!("{l}");
            }
            if summary.all_pass() {
                EXIT_PASS
            } else {
                EXIT_CRITERION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_USAGE;
        }
    };
    let Parsed { mut config, warnings } = match parse_config(&text) {
        Ok(p) => p,
        Err(e) => {
            eprint!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if config.experiment != kind {
        eprintln!("error: subcommand {kind} does not match configured experiment {}", config.experiment);
        return EXIT_USAGE;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = args.out {
        config.output.directory = dir;
    }
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    let outcome = match args.threads {
        Some(0) => {
            eprintln!("error: --threads must be ≥ 1");
            return EXIT_USAGE;
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run_experiment(&config, &warnings)),
            Err(e) => {
                eprintln!("error: cannot start thread pool: {e}");
                return EXIT_USAGE;
            }
        },
        None => run_experiment(&config, &warnings),
    };
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    if let Some(s) = &outcome.summary {
        for v in &s.criteria {
            println!("{v}");
        }
    }
    println!("results written to {}", outcome.directory.display());
    outcome.exit_code
}
