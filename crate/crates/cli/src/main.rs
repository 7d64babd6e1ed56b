//! Experiment driver: seeded runs, method comparisons, reference
//! materialization, and metric aggregation over a TOML run config.

mod commands;
mod config;
mod outputs;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "steersmc", version, about = "Weighted-particle sampling engine with on-the-fly drift control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run config (or the run_meta.json of a previous run).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (falls back to config, then $STEERSMC_OUT, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed list (comma-separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config's deterministic flag.
    #[arg(long)]
    deterministic: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method over every seed.
    Run(ConfigArgs),
    /// Run every method in `compare_methods` on identical seeds and
    /// references, then emit one table row per method.
    Compare(ConfigArgs),
    /// Materialize (and cache) the reference sample set.
    Reference(ConfigArgs),
    /// Aggregate metrics_*.json files under a directory into a CSV.
    Aggregate {
        /// Directory to scan (two levels deep).
        #[arg(long)]
        dir: PathBuf,
        /// Output CSV path (default: <dir>/aggregate.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        config.engine.seeds = seeds.clone();
    }
    if let Some(deterministic) = args.deterministic {
        config.engine.deterministic = deterministic;
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker pool")?;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => {
            load_config(args).and_then(|cfg| commands::cmd_run(&cfg, args.out.as_deref()))
        }
        Command::Compare(args) => {
            load_config(args).and_then(|cfg| commands::cmd_compare(&cfg, args.out.as_deref()))
        }
        Command::Reference(args) => {
            load_config(args).and_then(|cfg| commands::cmd_reference(&cfg, args.out.as_deref()))
        }
        Command::Aggregate { dir, out } => commands::cmd_aggregate(dir, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
