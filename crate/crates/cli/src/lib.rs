//! Batch front-end for `nonlocal-core`: reads a JSON run config, runs one
//! pipeline and writes its artifacts.
//!
//! Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 for
//! an invalid config or usage, 3 when a prerequisite certificate is missing
//! and 4 for any other runtime error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("missing certificate {0}")]
    MissingCertificate(String),
    #[error("{0}")]
    Core(nonlocal_core::Error),
    #[error("io: {0}")]
    Io(String),
}

impl From<nonlocal_core::Error> for CliError {
    fn from(e: nonlocal_core::Error) -> Self {
        match e {
            nonlocal_core::Error::MissingCertificate(what) => CliError::MissingCertificate(what),
            nonlocal_core::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingCertificate(_) => 3,
            CliError::Core(_) | CliError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nonlocal", version, about = "Non-local operator toolkit: certificates, symbols, solves and estimate suites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run config; defaults apply to everything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Global seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Points per axis (overrides `grid.n`).
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    /// Box side length (overrides `grid.box`).
    #[arg(long = "grid-box", global = true)]
    pub grid_box: Option<f64>,
    /// Estimate suites to run, comma separated (overrides `verify.suites`).
    #[arg(long, global = true, value_delimiter = ',')]
    pub suite: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Certify the hypotheses for the configured kernel and coefficient.
    KernelCheck,
    /// Tabulate the multiplier on the configured grid.
    SymbolDump,
    /// Solve the resolvent equation for every configured λ.
    Solve,
    /// Run estimate suites.
    Verify,
    /// Feynman–Kac Monte Carlo against the spectral solution.
    Mc,
}

/// Loads the config and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.grid_n {
        config.grid.n = n;
        config.verify.use_config_grid = true;
    }
    if let Some(b) = cli.grid_box {
        config.grid.box_len = b;
        config.verify.use_config_grid = true;
    }
    if !cli.suite.is_empty() {
        config.verify.suites = cli.suite.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Runs the subcommand; `Ok(true)` when every verdict passed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let config = resolve_config(cli)?;
    let base = cli
        .config
        .as_ref()
        .and_then(|p| p.parent().map(PathBuf::from))
        .unwrap_or_default();
    match cli.command {
        Command::KernelCheck => commands::kernel_check(&config),
        Command::SymbolDump => commands::symbol_dump(&config),
        Command::Solve => commands::solve(&config, &base),
        Command::Verify => commands::verify(&config),
        Command::Mc => commands::mc(&config, &base),
    }
}
