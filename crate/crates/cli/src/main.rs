mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "ksglasso",
    version,
    about = "Sparse Kronecker-sum graphical models: simulate data, estimate graphs, evaluate fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate ground-truth graphs and matrix-variate samples.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Fit one pair of graphs.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Fit a regularization grid, score it by BIC and, given the truth, by precision and recall.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Random,
    Clustered,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Number of features (columns of each sample).
    #[arg(long)]
    pub p: usize,
    /// Number of rows of each sample; defaults to --p.
    #[arg(long)]
    pub q: Option<usize>,
    /// Target nonzeros of Θ, diagonal included (random graphs).
    #[arg(long)]
    pub nnz: Option<usize>,
    /// Target nonzeros of Ψ; defaults to `nnz·q/p`.
    #[arg(long)]
    pub nnz_psi: Option<usize>,
    /// Number of diagonal blocks (clustered graphs).
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Number of samples to draw.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// key=value file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Hessian truncation; 0 selects the exact Hessian.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Target tr(Ψ)/tr(Θ); defaults to q/p.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Relative objective change that counts as converged.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Seed for the coordinate order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restrict updates to the connected components of the thresholded covariances.
    #[arg(long)]
    pub screening: bool,
    /// Fixed inner sweeps per Newton step instead of the increasing schedule.
    #[arg(long)]
    pub sweeps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sample file (q × p CSV); repeat for replicates.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub gamma_theta: f64,
    /// Defaults to the value of --gamma-theta.
    #[arg(long)]
    pub gamma_psi: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Fill the seconds column of trace.csv.
    #[arg(long)]
    pub record_time: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, requires = "truth_psi")]
    pub truth_theta: Option<PathBuf>,
    #[arg(long, requires = "truth_theta")]
    pub truth_psi: Option<PathBuf>,
    /// Comma-separated γ values applied to both graphs.
    #[arg(long)]
    pub gamma_grid: Option<String>,
    /// Size of the automatic geometric grid used without --gamma-grid.
    #[arg(long, default_value_t = 8)]
    pub grid_points: usize,
    /// Smallest automatic γ as a fraction of the largest.
    #[arg(long, default_value_t = 0.05)]
    pub grid_ratio: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Worker threads for the grid; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn run(argv: Vec<OsString>) -> Result<u8, CliError> {
    let argv = config::merge_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args, &argv),
        Command::Estimate(args) => commands::estimate(&args, &argv),
        Command::Eval(args) => commands::eval(&args, &argv),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
