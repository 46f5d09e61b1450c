//! `hazardforge`: simulate, prepare, fit, monitor and evaluate
//! continuous-time hazard models from the command line.

mod commands;
mod failure;
mod inputs;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{evaluate, fit, monitor, prepare, simulate};
use failure::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hazardforge", version, about = "Realtime risk monitoring with boosted hazard models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort with a known hazard.
    Simulate(simulate::SimulateArgs),
    /// Discretize raw observations onto a carry-forward grid.
    Ingest(prepare::IngestArgs),
    /// Merge note embeddings into long-format data.
    Fuse(prepare::FuseArgs),
    /// Grouped K-fold cross-validation over depth and tree count.
    Cv(fit::CvArgs),
    /// Fit a hazard ensemble.
    Train(fit::TrainArgs),
    /// Score an epoch stream row by row.
    Monitor(monitor::MonitorArgs),
    /// Flagging metrics, ROC/PR curves, AUCt and lead times.
    Evaluate(evaluate::EvaluateArgs),
    /// Normalized split-gain importance of a model's features.
    Importance(fit::ImportanceArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("HAZARDFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input("InvalidConfig", format!("HAZARDFORGE_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input("InvalidConfig", e.to_string()))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Ingest(a) => prepare::ingest(a),
        Command::Fuse(a) => prepare::fuse(a),
        Command::Cv(a) => fit::cv(a),
        Command::Train(a) => fit::train(a),
        Command::Monitor(a) => monitor::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Importance(a) => fit::importance(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.kind == failure::BROKEN_PIPE => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code as u8)
        }
    }
}
