use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use unlearn_core::{Error, ErrorCategory};

mod commands;

/// Retain-sensitivity bounds, certified unlearning and ratio sweeps.
#[derive(Parser, Debug)]
#[command(name = "unlearn", version, about)]
struct Cli {
    /// Experiment config (TOML). Used by `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for report files.
    #[arg(long, global = true, env = "UNLEARN_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    master_seed: Option<u64>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Retain and global sensitivity of one dataset, as JSON.
    Sensitivity(ProblemArgs),
    /// Empirical retain sensitivity by brute force, as JSON.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Candidate additions to try (grid points for the median).
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Delete one row with Descent-to-Delete or the Newton update.
    Unlearn(UnlearnArgs),
    /// Run a parameter sweep and write the report and summary CSVs.
    Sweep {
        /// Experiment to run with default settings when no config is given.
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Quick built-in consistency checks.
    Selftest,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Median,
    Mst,
    Pca,
    Svm,
    Mse,
    Logistic,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Input file: CSV for features, single-column CSV for the median, edge
    /// list for the MST.
    #[arg(long)]
    data: PathBuf,
    /// Label column of a feature CSV.
    #[arg(long, default_value = "y")]
    label_column: String,
    /// z-score the feature columns.
    #[arg(long)]
    standardize: bool,
    /// Rescale rows so the largest norm equals B.
    #[arg(long)]
    scale: bool,
    /// Gaussian random projection to this dimension.
    #[arg(long)]
    jl_dim: Option<usize>,
    /// Row-norm bound B (for the MST: weight bound, default max weight).
    #[arg(long)]
    bound_b: Option<f64>,
    /// Parameter-norm cap R_w.
    #[arg(long, default_value_t = 1.0)]
    bound_rw: f64,
}

#[derive(Args, Debug)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[command(flatten)]
    data: DataArgs,
    /// Regularization strength (ERM).
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Projector rank (PCA).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// True margin of the distribution (SVM).
    #[arg(long)]
    gamma: Option<f64>,
    /// RBF bandwidth; linear kernel when absent (SVM).
    #[arg(long)]
    rbf_bandwidth: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    D2d,
    Newton,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossArg {
    Mse,
    Logistic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationArg {
    Retain,
    Global,
}

#[derive(Args, Debug)]
pub struct UnlearnArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, value_enum, default_value = "logistic")]
    loss: LossArg,
    #[command(flatten)]
    data: DataArgs,
    /// Row to delete (0-based).
    #[arg(long)]
    delete_index: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "retain")]
    calibration: CalibrationArg,
    /// Noise scale for Descent-to-Delete.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Sensitivity(p) => commands::sensitivity(p),
        Command::Oracle { problem, trials, seed } => commands::oracle(problem, *trials, *seed),
        Command::Unlearn(u) => commands::unlearn(u),
        Command::Sweep { experiment } => commands::sweep(
            cli.config.as_deref(),
            experiment.as_deref(),
            cli.output_dir.as_deref(),
            cli.workers,
            cli.master_seed,
        ),
        Command::Selftest => commands::selftest(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
