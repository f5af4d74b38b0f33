//! Command-line harness: corpus generation, trace replay and experiments.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trustgate::GateMode;

pub use config::Config;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] trustgate::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Config(_) => exit::VALIDATION,
            CliError::Core(e) if e.is_io() => exit::IO,
            CliError::Core(_) => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trustgate", version, about = "Graduated trust gating for location fixes")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, env = "TRUSTGATE_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and its manifest
    Generate(GenerateArgs),
    /// Run a trace file through the gate, logging every fix
    Replay(ReplayArgs),
    /// Run one of the evaluation experiments
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Master seed (overrides the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSONL path; the manifest is written next to it
    #[arg(long, default_value = "corpus.jsonl")]
    pub out: PathBuf,
    #[arg(long)]
    pub traces_per_scenario: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSONL trace file
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub theta_p: Option<f64>,
    #[arg(long)]
    pub theta_s: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Graduated)]
    pub mode: ModeArg,
    /// Warn about unknown fields instead of rejecting them
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Binary,
    Graduated,
}

impl From<ModeArg> for GateMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Binary => GateMode::Binary,
            ModeArg::Graduated => GateMode::Graduated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Detection,
    Ablation,
    Sweep,
    Robustness,
    Bench,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    /// JSONL corpus; generated from the config when omitted
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory for the CSV, markdown and JSON reports
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => commands::generate(&config, &a, out),
        Command::Replay(a) => commands::replay(&config, &a, out),
        Command::Experiment(a) => commands::experiment(&config, &a, out),
    }
}
