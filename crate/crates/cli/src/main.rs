//! `maxwell1d`: batch front end for the spectral solver.
//!
//! Exit codes: 0 success, 1 usage or validation, 2 numerical failure, 3 I/O.

mod commands;
mod config;
mod svg;

use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(maxwell1d::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 3,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<maxwell1d::Error> for CliError {
    fn from(e: maxwell1d::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(name = "maxwell1d", version, about = "Fourier-side solver for the 1D dissipative Maxwell model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a (p, q) pair: regime, r, Gevrey exponent, moment range.
    Classify {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// Integrate the Fourier equation and write a run directory.
    Evolve(EvolveArgs),
    /// Compute the stationary profile by fixed-point iteration.
    Steady(SteadyArgs),
    /// Distance and norm time series of a run against a reference state.
    Metrics(MetricsArgs),
    /// Numerical tests of the square-root functional inequality (p + q = 1).
    Lyapunov(LyapunovArgs),
    /// Classify every cell of a (p, q) rectangle.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct EvolveArgs {
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    /// `scaled` or `unscaled`.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub quad_nodes: Option<String>,
    #[arg(long)]
    pub snapshot_every: Option<String>,
    #[arg(long)]
    pub tail_tol: Option<String>,
    /// `gaussian`, `twopoint`, `steady` or `file:<path>`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub xi_max: Option<String>,
    #[arg(long)]
    pub n_points: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Manifest timestamp; defaults to SOURCE_DATE_EPOCH, else 0.
    #[arg(long)]
    pub created: Option<String>,
}

#[derive(Args)]
pub struct SteadyArgs {
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    #[arg(long, default_value_t = 0.3)]
    pub q: f64,
    /// Moment excess of the contraction metric `d_{2+delta}`.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 40.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 4097)]
    pub n_points: usize,
    #[arg(long, default_value = "steady")]
    pub out: std::path::PathBuf,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Run directory written by `evolve`.
    #[arg(long)]
    pub run: std::path::PathBuf,
    /// `steady` (the stationary profile for the run's parameters) or a snapshot file.
    #[arg(long, default_value = "steady")]
    pub reference: String,
    #[arg(long, default_value_t = 2.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["run", "input", "corpus"])))]
pub struct LyapunovArgs {
    /// Scaled run directory: H along the snapshots plus one row per snapshot.
    #[arg(long)]
    pub run: Option<std::path::PathBuf>,
    /// Single snapshot file.
    #[arg(long)]
    pub input: Option<std::path::PathBuf>,
    /// Built-in corpus of test laws.
    #[arg(long)]
    pub corpus: bool,
    /// Overrides the parameters stored with the input.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 40.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 4097)]
    pub n_points: usize,
    #[arg(long, default_value_t = maxwell1d::lyapunov::DEFAULT_V_MAX)]
    pub v_max: f64,
    #[arg(long, default_value_t = maxwell1d::lyapunov::DEFAULT_V_POINTS)]
    pub v_points: usize,
    #[arg(long, default_value = "lyapunov")]
    pub out: std::path::PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.05)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub q_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q_max: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value = "sweep")]
    pub out: std::path::PathBuf,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MAXWELL1D_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MAXWELL1D_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Classify { p, q } => commands::classify(p, q),
        Command::Evolve(a) => commands::evolve(&a),
        Command::Steady(a) => commands::steady(&a),
        Command::Metrics(a) => commands::metrics(&a),
        Command::Lyapunov(a) => commands::lyapunov(&a),
        Command::Sweep(a) => commands::sweep(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maxwell1d: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
