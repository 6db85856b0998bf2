//! Command-line surface: data generation, training, evaluation,
//! strategy comparison, the AR(1) accumulation demo, and attention
//! dumps.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/format error,
//! 4 numerical abort.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mimo_seer_core::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 2,
        CliError::Core(Error::NumericalAbort(_)) | CliError::Core(Error::NonFinite(_)) => 4,
        CliError::Core(_) => 3,
    }
}

#[derive(Parser)]
#[command(name = "mimo-seer", version, about = "Multi-in multi-out video prediction at desk scale")]
pub struct Cli {
    /// JSON run configuration (omit for the built-in toy defaults).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a moving-sprite VSEQ dataset.
    GenData(commands::gen_data::GenDataArgs),
    /// Train a model and write checkpoints, loss history and metrics.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint (optionally beyond the native horizon).
    Eval(commands::eval::EvalArgs),
    /// Frame-wise error curves for mimo/miso/copy-last strategies.
    Compare(commands::compare::CompareArgs),
    /// Empirical vs closed-form AR(1) error accumulation.
    ArDemo(commands::ar_demo::ArDemoArgs),
    /// Dump temporal attention maps from a checkpoint.
    Attn(commands::attn::AttnArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(args) => commands::gen_data::run(&cli, args),
        Command::Train(args) => commands::train::run(&cli, args),
        Command::Eval(args) => commands::eval::run(&cli, args),
        Command::Compare(args) => commands::compare::run(&cli, args),
        Command::ArDemo(args) => commands::ar_demo::run(&cli, args),
        Command::Attn(args) => commands::attn::run(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
