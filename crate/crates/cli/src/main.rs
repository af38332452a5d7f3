//! Command-line front end: simulate panels, fit the copula state space
//! model, predict held-out cells, score predictions and emit contour grids.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "copula-ssm", version, about = "Bayesian copula state space models for multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated candidate families, e.g. `gaussian,clayton@180`.
    #[arg(long, global = true)]
    families: Option<String>,

    #[arg(long, global = true)]
    chains: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Simulate a panel from `[scenario]`, optionally masking cells.
    Simulate,
    /// Fit the model to `[data] input`.
    Fit,
    /// Impute missing cells and forecast from a previous fit.
    Predict,
    /// Score predictions against held-out truth.
    Score,
    /// Emit bivariate density grids on the normal-score scale.
    Contours,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let overrides = Overrides { seed: cli.seed, out: cli.out, families: cli.families, chains: cli.chains };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Simulate => commands::simulate_cmd(&cfg),
        Command::Fit => commands::fit_cmd(&cfg),
        Command::Predict => commands::predict_cmd(&cfg),
        Command::Score => commands::score_cmd(&cfg),
        Command::Contours => commands::contours_cmd(&cfg),
    }
}
