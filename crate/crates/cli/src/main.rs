//! `contagion` experiment runner.
//!
//! Exit codes: 0 when every check passes, 1 when a statistical check fails,
//! 2 on configuration or runtime errors.

mod bench;
mod config;
mod oracle;
mod report;
mod simulate;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{config_error, ConfigError, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "contagion",
    version,
    about = "Contagious point process experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for replicates (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run replicated simulations; writes point CSVs and summary.json.
    Simulate,
    /// Run a limit-theorem protocol; writes report.json.
    Verify {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        theorem: u8,
    },
    /// Exact enumeration against the ch.f. recursion and Monte Carlo.
    Oracle,
    /// Forward against backward sampling of the mother point.
    Identity,
    /// Simulation and sampler timings; writes timing.csv.
    Bench,
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config_error("--config is required"))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    report::create_out_dir(&cli.out)?;
    log::info!("config {} with seed {}", path.display(), cfg.seed);
    match &cli.command {
        Command::Simulate => simulate::run(&cfg, &cli.out),
        Command::Verify { theorem } => verify::run(&cfg, *theorem, &cli.out),
        Command::Oracle => oracle::oracle(&cfg, &cli.out),
        Command::Identity => oracle::identity(&cfg, &cli.out),
        Command::Bench => bench::run(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONTAGION_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            let kind = if err.downcast_ref::<ConfigError>().is_some() {
                "config"
            } else {
                "runtime"
            };
            let msg = serde_json::json!({ "error": kind, "message": format!("{err:#}") });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
