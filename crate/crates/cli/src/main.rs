//! `oya`: command line front end for the precipitation retrieval pipeline.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "oya", version, about = "Two-stage satellite precipitation retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the subcommands. Config files set defaults and flags
/// override them.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Key/value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Grid spec file (lat_min, lat_max, lon_min, lon_max, spacing keys).
    #[arg(long)]
    pub grid_spec: Option<PathBuf>,
    /// Comma-separated rate thresholds in mm/h.
    #[arg(long)]
    pub thresholds: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes and write them as a patch store.
    Synth(commands::SynthArgs),
    /// Tile scene records into patches and split them by year.
    BuildDataset(commands::BuildDatasetArgs),
    /// Train (pretrain, fine-tune or from scratch) and write a checkpoint.
    Train(commands::TrainArgs),
    /// Score predictions against a truth store.
    Evaluate(commands::EvaluateArgs),
    /// Run a checkpoint over a store and write a prediction store.
    Infer(commands::InferArgs),
    /// Merge per-satellite estimates into quasi-global products.
    Mosaic(commands::MosaicArgs),
    /// Run design-choice ablations and write a CSI table.
    Ablate(commands::AblateArgs),
    /// Write fields, images and metrics for one case.
    CaseReport(commands::CaseReportArgs),
}

fn configure_workers() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(oya::exec::NUM_WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{} must be a positive integer, got `{v}`", oya::exec::NUM_WORKERS_ENV))?;
        if n == 0 {
            anyhow::bail!("{} must be at least 1", oya::exec::NUM_WORKERS_ENV);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::BuildDataset(a) => commands::build_dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Infer(a) => commands::infer(a),
        Command::Mosaic(a) => commands::mosaic(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::CaseReport(a) => commands::case_report(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
