mod commands;
mod config;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "gittins", version, about = "Sampling-based Gittins index approximation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Approximate the index of one state.
    Index(IndexArgs),
    /// Reproduce an index table against calibration.
    Table(TableArgs),
    /// Exact indices by calibration.
    Calibrate(CalibrateArgs),
    /// Compare bandit policies on random-effects arms.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Bernoulli,
    Gaussian,
    RandomEffects,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// `Ψ,κ`; for random effects `clusters,particles` of a prior posterior.
    #[arg(long)]
    pub state: String,
    #[arg(long, default_value_t = 0.8)]
    pub gamma: f64,
    #[arg(long = "K", default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Horizon; derived from --eps-trunc when absent.
    #[arg(long = "N")]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0.0005)]
    pub eps_trunc: f64,
    #[arg(long, default_value_t = 0.001)]
    pub eps_nu: f64,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// `adaptive`, `constant:α` or `linear:A`.
    #[arg(long, default_value = "adaptive")]
    pub step: String,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    /// Rollout particles for random-effects arms.
    #[arg(long, default_value_t = 3)]
    pub d3: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// TOML config, or a manifest (`.json`) of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Depths, e.g. `1,2,3`.
    #[arg(long = "K")]
    pub depths: Option<String>,
    /// Branch counts, e.g. `1,3,5`.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub eps_nu: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Leave `cpu_seconds` empty so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Values or ranges, e.g. `1..6`; defaults to 0 for Gaussian arms.
    #[arg(long)]
    pub psi: Option<String>,
    /// `κ` values, e.g. `1..10,20`.
    #[arg(long)]
    pub kappa: Option<String>,
    /// `κ - Ψ` values, as an alternative to --kappa.
    #[arg(long)]
    pub failures: Option<String>,
    #[arg(long, default_value_t = 0.8)]
    pub gamma: f64,
    #[arg(long = "N")]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0.0005)]
    pub eps_trunc: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Number of decision epochs `T`.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Budget(String),
    Io(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Budget(_) => 4,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<gittins_core::Error> for CliError {
    fn from(e: gittins_core::Error) -> Self {
        match e {
            gittins_core::Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            gittins_core::Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) | CliError::Io(m) => f.write_str(m),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Budget(m) => f.write_str(m),
        }
    }
}

/// Solvers that stopped on the iteration cap still write their results.
pub const EXIT_MAX_ITERS: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.cmd {
        Cmd::Index(a) => commands::index(a),
        Cmd::Table(a) => commands::table(a),
        Cmd::Calibrate(a) => commands::calibrate(a),
        Cmd::Experiment(a) => commands::experiment(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
