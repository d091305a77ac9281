//! Batch front end for the `dasqos` engines: scenario files in, CSV out.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use commands::{Context, Overrides};
pub use config::Config;
pub use error::{CliError, CliResult, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Delay-violation curve, optionally against simulation.
    Delay,
    /// Per-antenna and system outage, or expected outage over users.
    Outage,
    /// Robbins-Monro antenna placement.
    Optimize,
    /// Expected outage over a grid of circle radii.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "dasqos", version, about = "Delay and outage workbench for distributed antenna cells")]
pub struct Cli {
    pub command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// User samples (or fading trials for fixed users).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Add simulation columns to `delay`.
    #[arg(long)]
    pub simulate: bool,
    /// Worker threads; defaults to `run.threads` or all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// CSV destination; defaults to `run.output` or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where `optimize` writes the final layout; defaults to stderr.
    #[arg(long)]
    pub layout_out: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = Config::load(&cli.config)?;
    if let Some(n) = cli.threads.or(config.run.threads) {
        if n == 0 {
            return Err(ConfigError::new(None, "--threads must be >= 1").into());
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out_path = cli.out.clone().or_else(|| config.run.output.clone());
    let overrides = Overrides { seed: cli.seed, samples: cli.samples, simulate: cli.simulate };
    let ctx = Context::new(config, &overrides)?;
    match out_path {
        Some(path) => {
            let file = BufWriter::new(File::create(&path)?);
            commands::run_to(cli.command, &ctx, file, cli.layout_out.as_deref())
        }
        None => commands::run_to(cli.command, &ctx, io::stdout().lock(), cli.layout_out.as_deref()),
    }
}
