//! Scenario runner behind the `squidpulse` binary.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Failure classes, mapped to process exit codes 2 and 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<squidpulse::Error> for CliError {
    fn from(e: squidpulse::Error) -> Self {
        use squidpulse::Error as E;
        match e {
            E::InvalidParameter { .. } | E::InvalidSpec(_) | E::Parse(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Resonance frequency against flux, with an optional refit.
    TuningCurve,
    /// Pulse emitted by a flux drive, plus phase and frequency sweeps.
    Emit,
    /// Two-pulse interference and constant-energy phase steering.
    Interfere,
    /// Frequency comb of a repeated pulse.
    Comb,
    /// Lorentzian linewidth bound under a Gaussian resolution filter.
    Linewidth,
    /// Single-shot dispersive readout with the emitted pulse as probe.
    Readout,
    /// Qubit Rabi rate against photon number.
    Rabi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TuningCurve => "tuning-curve",
            Command::Emit => "emit",
            Command::Interfere => "interfere",
            Command::Comb => "comb",
            Command::Linewidth => "linewidth",
            Command::Readout => "readout",
            Command::Rabi => "rabi",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "squidpulse",
    version,
    about = "Flux-driven SQUID resonator pulse simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML). Defaults to the reference device.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the scenario.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Root seed; overrides `seed` in the scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Reject unknown configuration keys instead of warning.
    #[arg(long, global = true)]
    pub strict: bool,
}

pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let mut scenario = match &cli.config {
        Some(path) => config::load(path, cli.strict)?,
        None => config::Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| scenario.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    let artifacts = pool.install(|| commands::execute(cli.command, &scenario))?;
    manifest::write(&out, cli.command, &scenario, artifacts)?;
    Ok(out)
}
