mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maxassoc::covariance::EstimatorTag;
use maxassoc::hyperopt::SearchMethod;
use maxassoc::optimizer::{InitMode, MultiplierStart};
use maxassoc::simlab::{Distribution, Setting, REPORT_CSV_COLUMNS};

#[derive(Parser, Debug)]
#[command(name = "maxassoc", version, about = "Robust sparse maximum-association estimation")]
struct Cli {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice (splits, searches, simulations).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit sparse directions to two CSV data sets and write a JSON result.
    Fit(FitArgs),
    /// Run a replicated simulation scenario.
    #[command(after_long_help = simulate_help())]
    Simulate(SimulateArgs),
    /// Exact penalty-free directions of a known covariance.
    Oracle(OracleArgs),
}

/// Penalty and optimizer options shared by `fit` and `simulate`.
#[derive(Args, Debug)]
pub struct PenaltyArgs {
    /// Elastic-net mixing for a (1 = lasso).
    #[arg(long)]
    pub alpha_a: Option<f64>,
    #[arg(long)]
    pub alpha_b: Option<f64>,
    /// Fixed penalty bound for a; without bounds they are searched.
    #[arg(long)]
    pub bound_a: Option<f64>,
    #[arg(long)]
    pub bound_b: Option<f64>,
    /// Search method for the bounds (bayes or random).
    #[arg(long)]
    pub search: Option<SearchMethod>,
    /// Evaluations per order in the bound search.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Initial multipliers: zero, or the constraint residuals of the start.
    #[arg(long)]
    pub multiplier_start: Option<MultiplierStart>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV of the x variables (rows = observations, optional header).
    #[arg(long)]
    pub x: PathBuf,
    /// CSV of the y variables, row-aligned with x.
    #[arg(long)]
    pub y: PathBuf,
    /// pearson, spearman, kendall or ogk.
    #[arg(long)]
    pub estimator: Option<EstimatorTag>,
    #[arg(long)]
    pub orders: Option<usize>,
    /// naive or orthogonal start for orders above 1.
    #[arg(long)]
    pub init: Option<InitMode>,
    /// Skip the nearest positive-definite repair of the estimate.
    #[arg(long)]
    pub no_repair: bool,
    /// Hold out this fraction of rows and report the residual score on it.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Fraction of largest test residuals dropped in the trimmed score.
    #[arg(long)]
    pub trim: Option<f64>,
    /// JSON output path (standard output when omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// low_dim, high_dim or runtime:<q>.
    #[arg(long)]
    pub setting: Option<Setting>,
    #[arg(long)]
    pub estimator: Option<EstimatorTag>,
    /// Observations per replicate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fraction of rows replaced by shifted draws, at most 0.5.
    #[arg(long)]
    pub contamination_rate: Option<f64>,
    #[arg(long)]
    pub contamination_shift: Option<f64>,
    /// normal or t3.
    #[arg(long)]
    pub distribution: Option<Distribution>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub orders: Option<usize>,
    #[arg(long)]
    pub init: Option<InitMode>,
    #[arg(long)]
    pub no_repair: bool,
    /// Directory receiving replicates.csv and summary.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for replicates (0 = all cores).
    #[arg(long, env = "MAXASSOC_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Named simulation setting.
    #[arg(long)]
    pub setting: Option<Setting>,
    /// Square symmetric covariance CSV, x variables first.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Number of x variables in --cov.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub orders: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn simulate_help() -> String {
    format!(
        "replicates.csv columns: {}, error\n\
         summary.json holds the per-order mean and standard error of every metric.",
        REPORT_CSV_COLUMNS.join(", ")
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> anyhow::Result<()> {
        let file = config::FileConfig::load(cli.config.as_deref())?;
        let seed = config::pick(cli.seed, file.seed, 0);
        match &cli.command {
            Command::Fit(a) => commands::cmd_fit(a, &file, seed),
            Command::Simulate(a) => commands::cmd_simulate(a, &file, seed),
            Command::Oracle(a) => commands::cmd_oracle(a, &file),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
