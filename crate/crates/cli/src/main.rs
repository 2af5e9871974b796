//! `grf`: config-driven factorization, sampling, verification and
//! integration for discretized Gaussian fields.

mod checks;
mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "grf", version, about = "Gaussian random fields from covariance kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose the covariance and write the white-noise kernel.
    Factorize(Common),
    /// Draw realizations of the truncated series.
    Sample(Common),
    /// Run the invariant checks and write a report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Factor CSV to verify instead of a freshly computed one.
        #[arg(long, value_name = "PATH")]
        factor: Option<PathBuf>,
    },
    /// Integrate a deterministic or random integrand against the field.
    Integrate {
        #[command(flatten)]
        common: Common,
        /// Integrand JSON.
        #[arg(long, value_name = "PATH")]
        integrand: PathBuf,
    },
    /// Gram matrices of rescaled increments along a scale ladder.
    Tangent(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `truncation` in the config.
    #[arg(long, value_name = "M")]
    truncate: Option<usize>,
    /// Overrides `gauge` in the config.
    #[arg(long, value_name = "NAME")]
    gauge: Option<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(m) = self.truncate {
            cfg.truncation = Some(m);
        }
        if let Some(g) = &self.gauge {
            cfg.gauge = g.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Factorize(c) => commands::factorize(&c.load()?, &c.out),
        Command::Sample(c) => commands::sample(&c.load()?, &c.out),
        Command::Verify { common, factor } => {
            let mut cfg = common.load()?;
            if let Some(path) = factor {
                // relative to the working directory, not the config
                cfg.verify.factor_file = Some(std::path::absolute(path)?);
            }
            commands::verify(&cfg, &common.out)
        }
        Command::Integrate { common, integrand } => commands::integrate(&common.load()?, &integrand, &common.out),
        Command::Tangent(c) => commands::tangent(&c.load()?, &c.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
