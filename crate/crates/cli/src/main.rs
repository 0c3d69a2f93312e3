//! `otto-ldf`: work-heat statistics and efficiency large deviations of
//! quantum Otto engines, written out as CSV/JSON data plus plot scripts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{ConfigError, Layers, Preset, Regime, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "otto-ldf", version, about = "Quantum Otto engine efficiency statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Work-heat Pearson coefficient over a Q* sweep.
    Pearson(Common),
    /// Efficiency rate function J(eta) on the configured grid.
    Ldf(Common),
    /// Cumulant generating function on a (gamma1, gamma2) grid.
    Contour(Common),
    /// Monte Carlo block efficiencies, histograms and empirical rates.
    Sample(Common),
    /// Print the resolved configuration.
    Config(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Parameter file (TOML: [baths], [two_level], [harmonic], [run], [ldf], [contour], [sample]).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Start from the parameters of a published figure.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Override one value, e.g. `--set harmonic.q_star=1.3`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, value_enum)]
    regime: Option<Regime>,
    /// Output directory.
    #[arg(long, short, env = "OTTO_LDF_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Line-search tolerance of the rate function.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Cross-check closed forms against brute-force oracles; exit 4 on failure.
    #[arg(long)]
    verify: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::field("--config", format!("cannot read {}: {e}", path.display())))?;
                Some((path.clone(), text))
            }
            None => None,
        };
        let mut config = RunConfig::resolve(&Layers {
            preset: self.preset,
            file,
            sets: self.sets.clone(),
        })?;
        if let Some(r) = self.regime {
            config.run.regime = r;
        }
        if let Some(s) = self.seed {
            config.run.seed = s;
        }
        if let Some(t) = self.tolerance {
            config.run.tolerance = t;
        }
        if let Some(o) = &self.out {
            config.run.out = Some(o.clone());
        }
        config.validate()?;
        Ok(config)
    }

    fn configure_threads(&self) -> Result<(), CliError> {
        let Some(n) = self.threads else {
            return Ok(());
        };
        if n == 0 {
            return Err(ConfigError::field("--threads", "must be at least 1").into());
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError::field("--threads", e.to_string()))?;
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd) = match &cli.command {
        Command::Pearson(c) => (c, "pearson"),
        Command::Ldf(c) => (c, "ldf"),
        Command::Contour(c) => (c, "contour"),
        Command::Sample(c) => (c, "sample"),
        Command::Config(c) => (c, "config"),
    };
    let config = common.resolve()?;
    if cmd == "config" {
        print!("{}", config.to_toml());
        return Ok(());
    }
    common.configure_threads()?;
    let dir = config.run.out.clone().unwrap_or_else(|| PathBuf::from("otto-ldf-out"));
    let written = match cmd {
        "pearson" => commands::pearson(&config, &dir, common.verify)?,
        "ldf" => commands::ldf(&config, &dir, common.verify)?,
        "contour" => commands::contour(&config, &dir, common.verify)?,
        _ => commands::sample(&config, &dir, common.verify)?,
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otto-ldf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
