//! `slicedmi` command-line tool.
//!
//! Exit codes: 0 success, 2 input error, 3 estimator error, 4 config error.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slicedmi::smine::TrainConfig;
use slicedmi::synthetic::ScenarioKind;

use crate::commands::Sink;
use crate::config::{output_dir, EstimateSection, ExtractSection, GenSection, RunConfig, SmineSection, Unit};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "slicedmi", version, about = "Sliced mutual information estimation and experiments")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the command; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    unit: Option<Unit>,
    /// Output directory. Falls back to $SLICEDMI_OUTPUT_DIR, then the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate SMI between two data files.
    Estimate {
        x: Option<PathBuf>,
        y: Option<PathBuf>,
        /// Number of slices.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Monte-Carlo SMI of a Gaussian specification.
    Oracle,
    /// Independence-testing AUC experiment.
    Indep,
    /// Convergence-rate sweep.
    Rates,
    /// Train the variational SMI estimator on two data files.
    Smine {
        x: Option<PathBuf>,
        y: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Learn linear features that maximize SMI.
    Extract {
        x: Option<PathBuf>,
        y: Option<PathBuf>,
        #[arg(long)]
        r_x: Option<usize>,
        #[arg(long)]
        r_y: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write a synthetic dataset as x.csv and y.csv.
    Gen {
        /// Scenario label: a-e or a snake-case name.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate { .. } => "estimate",
            Command::Oracle => "oracle",
            Command::Indep => "indep",
            Command::Rates => "rates",
            Command::Smine { .. } => "smine",
            Command::Extract { .. } => "extract",
            Command::Gen { .. } => "gen",
        }
    }
}

fn pair(x: Option<PathBuf>, y: Option<PathBuf>) -> Option<(PathBuf, PathBuf)> {
    x.zip(y)
}

/// Folds subcommand flags into the config, creating the section if needed.
fn apply_flags(config: &mut RunConfig, command: Command) -> Result<()> {
    match command {
        Command::Estimate { x, y, m, k } => {
            if let Some((x, y)) = pair(x, y) {
                let smi = config.estimate.take().map(|s| s.smi).unwrap_or_default();
                config.estimate = Some(EstimateSection { x, y, smi });
            }
            if let Some(s) = &mut config.estimate {
                s.smi.m = m.unwrap_or(s.smi.m);
                s.smi.knn.k = k.unwrap_or(s.smi.knn.k);
            }
        }
        Command::Smine { x, y, epochs } => {
            if let Some((x, y)) = pair(x, y) {
                let train = config.smine.take().map(|s| s.train).unwrap_or_default();
                config.smine = Some(SmineSection { x, y, train });
            }
            if let Some(s) = &mut config.smine {
                s.train.epochs = epochs.unwrap_or(s.train.epochs);
            }
        }
        Command::Extract { x, y, r_x, r_y, epochs } => {
            if let Some((x, y)) = pair(x, y) {
                let old = config.extract.take();
                let r_x = r_x.or(old.as_ref().map(|s| s.r_x)).ok_or_else(|| CliError::Config("extract needs --r-x".into()))?;
                let r_y = old.as_ref().map_or(0, |s| s.r_y);
                let train = old.map(|s| s.train).unwrap_or_else(TrainConfig::default);
                config.extract = Some(ExtractSection { x, y, r_x, r_y, train });
            }
            if let Some(s) = &mut config.extract {
                s.r_x = r_x.unwrap_or(s.r_x);
                s.r_y = r_y.unwrap_or(s.r_y);
                s.train.epochs = epochs.unwrap_or(s.train.epochs);
            }
        }
        Command::Gen { scenario, d, n } => {
            if let Some(label) = scenario {
                let d = d.ok_or_else(|| CliError::Config("--scenario needs --d".into()))?;
                let kind = ScenarioKind::from_label(&label, d).map_err(CliError::invalid)?;
                let n = n.or(config.gen.as_ref().map(|g| g.n)).ok_or_else(|| CliError::Config("gen needs --n".into()))?;
                let seed = config.gen.as_ref().map_or(0, |g| g.seed);
                config.gen = Some(GenSection { scenario: kind, n, seed });
            } else if let Some(g) = &mut config.gen {
                if let Some(d) = d {
                    g.scenario = g.scenario.with_dim(d);
                }
                g.n = n.unwrap_or(g.n);
            }
        }
        Command::Oracle | Command::Indep | Command::Rates => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let name = cli.command.name();
    apply_flags(&mut config, cli.command)?;
    config.seed = cli.seed.or(config.seed);
    config.unit = cli.unit.unwrap_or(config.unit);
    config.resolve_seed();
    let sink = Sink { dir: output_dir(cli.output.as_deref(), &config), config: config.provenance(name) };
    match name {
        "estimate" => commands::estimate(&sink),
        "oracle" => commands::oracle(&sink),
        "indep" => commands::indep(&sink),
        "rates" => commands::rates(&sink),
        "smine" => commands::smine(&sink),
        "extract" => commands::extract(&sink),
        _ => commands::gen(&sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
