use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod output;
mod settings;

use settings::SuiteFlags;

#[derive(Debug, Parser)]
#[command(name = "navsynth", version, about = "Grid navigation rollouts, dataset synthesis and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: SuiteFlags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate maps and write them as ASCII files.
    MapGen,
    /// Run the episode suite and write episode logs plus a report.
    Rollout,
    /// Build a training dataset.
    Synth {
        #[command(subcommand)]
        stage: Stage,
    },
    /// Compute SR, SPL and SOT for an episode log.
    Eval {
        /// Episode JSONL file.
        #[arg(long)]
        logs: std::path::PathBuf,
    },
    /// SOT over a grid of per-token latencies.
    SweepTau {
        #[arg(long)]
        logs: std::path::PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Stage {
    /// Shortest-path conversations.
    Stage1,
    /// Segmented exploration trajectories with memory and reasoning.
    Stage2,
    /// One round of rollout, rejection and repair.
    Irft,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            _ => 1,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = settings::Settings::resolve(&cli.flags)?;
    let out = settings::out_dir(&cli.flags)?;
    match cli.command {
        Command::MapGen => commands::map_gen(&settings, out),
        Command::Rollout => commands::rollout(&settings, out),
        Command::Synth { stage } => commands::synth(&settings, stage, out),
        Command::Eval { logs } => commands::eval(&settings, &logs, out),
        Command::SweepTau { logs } => commands::sweep_tau(&settings, &logs, out),
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
            eprintln!("navsynth: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
