//! `dqs`: run distributed-sensing experiments from a TOML config.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure, 1 anything
//! else (I/O).

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Format, Overrides};

/// Thread count for the Monte Carlo pool; results do not depend on it.
pub const THREADS_ENV: &str = "DQS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "dqs", version, about = "Distributed quantum sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Name,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Name {
    /// Monte Carlo estimate of the weighted displacement (JSON)
    Estimate,
    /// Precision versus node count for both probe kinds (CSV)
    SweepScaling,
    /// Optimal precisions and lower bounds versus loss (CSV)
    CompareBounds,
    /// Fisher information of the optimal probe (JSON)
    Fisher,
    /// RF-field estimation task (JSON)
    RfTask,
    /// Photon allocation for separable probes (JSON)
    OptimizeAllocation,
    /// Small-angle phase estimation with homodyne detection (JSON)
    Phase,
    /// Estimator variance versus one tunable splitting ratio (CSV)
    SweepEntanglement,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

/// Input rejected by the front end itself, before reaching the simulator.
#[derive(Debug)]
pub struct Invalid {
    pub field: &'static str,
    pub reason: String,
}

impl Invalid {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<dqs_core::Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
    }
    1
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Invalid::new(
            "DQS_THREADS",
            format!("expected a positive integer, got {raw:?}"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let common = cli.common;
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let config = base.merge(&Overrides {
        seed: common.seed,
        trials: common.trials,
        out: common.out,
        format: common.format,
    });
    commands::dispatch(cli.command, &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
