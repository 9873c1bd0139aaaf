//! `iod` — one-shot initial orbit determination from simultaneous radar
//! range, angle and Doppler measurements.
//!
//! Subcommands: `simulate` (synthesize measurement files from a scenario),
//! `solve` (run one estimator on a measurement file), `bench` (Monte Carlo
//! sweeps with CSV/JSON export) and `trs-check` (cross-validate the two
//! trust-region solvers). Machine-readable output goes to standard output;
//! progress and diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 estimator/numerical
//! failure, 3 I/O error.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iod_core::bench::Estimator;
use iod_core::mle::{SolverConfig, TrsBackend};

/// Environment variable setting the worker-thread count for benchmark
/// sweeps (defaults to all cores).
const PARALLELISM_ENV: &str = "IOD_PARALLELISM";

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, scenario, or input document.
    Usage(String),
    /// An estimator or numerical check failed.
    Estimator(String),
    /// Filesystem or serialization failure.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Estimator(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Estimator(m) | CliError::Io(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "iod",
    version,
    about = "One-shot initial orbit determination from radar range, angle and Doppler measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum EstimatorArg {
    Mle,
    Trilateration,
}

impl From<EstimatorArg> for Estimator {
    fn from(arg: EstimatorArg) -> Self {
        match arg {
            EstimatorArg::Mle => Estimator::Mle,
            EstimatorArg::Trilateration => Estimator::Trilateration,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum TrsBackendArg {
    Eigen,
    Secular,
}

impl From<TrsBackendArg> for TrsBackend {
    fn from(arg: TrsBackendArg) -> Self {
        match arg {
            TrsBackendArg::Eigen => TrsBackend::Eigen,
            TrsBackendArg::Secular => TrsBackend::Secular,
        }
    }
}

#[derive(clap::Args, Clone, Copy, Debug)]
struct SolverArgs {
    /// Maximum block-coordinate-descent sweeps.
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// Relative stall tolerance on the relaxed cost.
    #[arg(long, default_value_t = 1e-13)]
    tolerance: f64,
    /// Trust-region solver backing the inner updates.
    #[arg(long, value_enum, default_value = "eigen")]
    trs_backend: TrsBackendArg,
    /// Refine the relaxed solution on the original cost afterwards.
    #[arg(long)]
    polish: bool,
}

impl SolverArgs {
    fn to_config(self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations,
            rel_cost_tolerance: self.tolerance,
            trs_backend: self.trs_backend.into(),
            polish_original: self.polish,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a measurement file from a scenario.
    Simulate {
        /// Scenario JSON (single-cell: no sweep axes).
        #[arg(long)]
        scenario: PathBuf,
        /// Output measurement JSON path.
        #[arg(long)]
        output: PathBuf,
        /// Override the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Omit the true states (blind file).
        #[arg(long)]
        strip_truth: bool,
    },
    /// Estimate object states from a measurement file.
    Solve {
        /// Measurement JSON produced by `simulate`.
        #[arg(long)]
        measurements: PathBuf,
        /// Which estimator to run.
        #[arg(long, value_enum, default_value = "mle")]
        estimator: EstimatorArg,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the Monte Carlo sweep of a scenario.
    Bench {
        /// Scenario JSON (sweep axes allowed).
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for results.csv / summary.json (and per-level
        /// subdirectories for noise-level sweeps).
        #[arg(long)]
        output_dir: PathBuf,
        /// Validate and print the sweep cell count without computing.
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Cross-validate the trust-region solvers on random instances.
    TrsCheck {
        /// Number of random instances.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Base seed; instance k uses RNG stream k of this seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scaled residual/agreement tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

fn configure_parallelism() {
    if let Ok(value) = std::env::var(PARALLELISM_ENV) {
        match value.parse::<usize>() {
            Ok(threads) if threads >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                {
                    eprintln!("warning: could not set {PARALLELISM_ENV}={threads}: {e}");
                }
            }
            _ => eprintln!("warning: ignoring invalid {PARALLELISM_ENV}={value}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            scenario,
            output,
            seed,
            strip_truth,
        } => commands::simulate(&scenario, &output, seed, strip_truth),
        Command::Solve {
            measurements,
            estimator,
            solver,
        } => commands::solve(&measurements, estimator.into(), &solver.to_config()),
        Command::Bench {
            scenario,
            output_dir,
            dry_run,
            solver,
        } => commands::bench_sweep(&scenario, &output_dir, dry_run, &solver.to_config()),
        Command::TrsCheck {
            count,
            seed,
            tolerance,
        } => commands::trs_check(count, seed, tolerance),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let code = if error.use_stderr() { 1 } else { 0 };
            let _ = error.print();
            return ExitCode::from(code);
        }
    };
    configure_parallelism();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {}", error.message());
            ExitCode::from(error.exit_code())
        }
    }
}
