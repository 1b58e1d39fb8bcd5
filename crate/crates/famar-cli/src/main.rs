//! `famar` — batch front end for factor-augmented matrix regression.

mod commands;
mod config;
mod errors;
mod io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "famar",
    version,
    about = "Factor-augmented matrix regression: estimation, prediction, and synthetic experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic experiment preset or a custom generative recipe.
    Simulate(SimulateArgs),
    /// Estimate the factor model and the penalized regression from panel data.
    Fit(FitArgs),
    /// Predict responses for a new panel from saved fit artifacts.
    Predict(PredictArgs),
    /// Export normalized (optionally varimax-rotated) loading heat-map data.
    Loadings(LoadingsArgs),
    /// Rolling-window one-step-ahead prediction with out-of-sample R^2.
    Rolling(RollingArgs),
}

#[derive(Args)]
pub(crate) struct SimulateArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// normality | setting1 | setting2 | appendix-h1 | appendix-h2 | appendix-h3
    #[arg(long)]
    pub(crate) preset: Option<String>,
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    /// Replications per grid point.
    #[arg(long)]
    pub(crate) reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
    /// Also write the generated dataset of replication 0 as CSV files.
    #[arg(long)]
    pub(crate) emit_data: bool,
}

#[derive(Args)]
pub(crate) struct FitArgs {
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// Long-format covariate panel CSV (sample_id,row,col,value).
    #[arg(long)]
    pub(crate) panel: Option<PathBuf>,
    /// Response CSV (sample_id,value).
    #[arg(long)]
    pub(crate) response: Option<PathBuf>,
    /// Explicit pre-training panel CSV (disjoint from the estimation panel).
    #[arg(long)]
    pub(crate) pretrain: Option<PathBuf>,
    /// Use the first floor(frac * n) samples of the panel for pre-training.
    #[arg(long)]
    pub(crate) pretrain_frac: Option<f64>,
    #[arg(long)]
    pub(crate) k1: Option<usize>,
    #[arg(long)]
    pub(crate) k2: Option<usize>,
    /// nuclear | sparse | baseline
    #[arg(long)]
    pub(crate) method: Option<String>,
    /// Fixed penalty weight; mutually exclusive with --lambda-grid.
    #[arg(long)]
    pub(crate) lambda: Option<f64>,
    /// Cross-validated grid 'points,min_frac,max_frac' of the null threshold.
    #[arg(long)]
    pub(crate) lambda_grid: Option<String>,
    #[arg(long)]
    pub(crate) folds: Option<usize>,
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct PredictArgs {
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// Directory with fit artifacts.
    #[arg(long)]
    pub(crate) fit: PathBuf,
    /// New covariate panel CSV.
    #[arg(long)]
    pub(crate) panel: Option<PathBuf>,
    /// Optional true responses; enables the R^2 report.
    #[arg(long)]
    pub(crate) response: Option<PathBuf>,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct LoadingsArgs {
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// Directory with fit artifacts.
    #[arg(long)]
    pub(crate) fit: PathBuf,
    /// Emit raw normalized loadings without the varimax rotation.
    #[arg(long)]
    pub(crate) no_rotate: bool,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct RollingArgs {
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    #[arg(long)]
    pub(crate) panel: Option<PathBuf>,
    #[arg(long)]
    pub(crate) response: Option<PathBuf>,
    /// Window width (pre-training plus training samples).
    #[arg(long)]
    pub(crate) window: Option<usize>,
    /// Pre-training samples at the start of each window.
    #[arg(long)]
    pub(crate) pretrain_len: Option<usize>,
    #[arg(long)]
    pub(crate) k1: Option<usize>,
    #[arg(long)]
    pub(crate) k2: Option<usize>,
    /// famar | factors-only | idio-only | baseline
    #[arg(long)]
    pub(crate) method: Option<String>,
    #[arg(long)]
    pub(crate) lambda_grid: Option<String>,
    #[arg(long)]
    pub(crate) folds: Option<usize>,
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("FAMAR_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Loadings(args) => commands::loadings::run(args),
        Command::Rolling(args) => commands::rolling::run(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e);
            std::process::exit(e.code);
        }
    }
}
