mod commands;
mod config;
mod verdict;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Sink;
use config::AnalysisConfig;

pub const EXIT_INEQUALITY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_TRUNCATED: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource cap reached: {0}")]
    Truncated(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Truncated(_) => EXIT_TRUNCATED,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "alignkit",
    version,
    about = "Separability and DoF analysis of K-user interference channels"
)]
struct Cli {
    /// JSON analysis configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override the cap on generated set sizes.
    #[arg(long, global = true)]
    cap_values: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obstruction search, 3-user procedure, injectivity grid and DoF pipeline.
    Analyze,
    /// Codebook cardinalities and their log-ratio series.
    Codebook,
    /// Entropy of a linear combination of independent inputs.
    Entropy,
    /// Randomized checks of the entropy-inequality oracles.
    CheckInequalities {
        /// Cases per oracle.
        #[arg(long, default_value_t = 1000)]
        cases: u64,
    },
    /// 3-user decision procedure for channels with a missing link.
    Classify3,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => AnalysisConfig::load(p)?,
        None if matches!(cli.command, Command::CheckInequalities { .. }) => AnalysisConfig::default(),
        None => return Err(CliError::Config("--config is required for this command".into())),
    };
    if let Some(v) = cli.cap_values {
        if v == 0 {
            return Err(CliError::Config("--cap-values must be positive".into()));
        }
        cfg.caps.max_values = v;
    }
    let sink = Sink::new(&cli.out)?;
    match cli.command {
        Command::Analyze => commands::analyze(&cfg, &sink),
        Command::Codebook => commands::codebook(&cfg, &sink),
        Command::Entropy => commands::entropy(&cfg, &sink),
        Command::CheckInequalities { cases } => commands::check_inequalities(&cfg, cli.seed, cases, &sink),
        Command::Classify3 => commands::classify3(&cfg, &sink),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("alignkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
