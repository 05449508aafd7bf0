use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use evcd_core::config::PipelineConfig;
use evcd_core::dopf::Mode;
use evcd_core::pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "evcd",
    version,
    about = "Behavior-aware DRCC dispatch pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Comma-separated dispatch modes: deterministic, drcc, drcc_pm.
    #[arg(long, global = true, value_delimiter = ',')]
    mode: Option<Vec<Mode>>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sample owner populations and write scenarios.csv.
    Simulate,
    /// Estimate moments from scenarios.csv; write moments.csv and cov.csv.
    Moments,
    /// Solve the dispatch for each mode; write dispatch_<mode>.csv.
    Solve,
    /// Post-optimization evaluation; write eval_summary.csv, violations.csv and comparison.txt.
    Evaluate,
    /// All stages in order.
    Pipeline,
}

fn run(cli: Cli) -> Result<()> {
    let path = cli.config.context("--config <path> is required")?;
    let mut cfg = PipelineConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(modes) = cli.mode {
        cfg.dopf.modes = modes;
    }
    cfg.validate()?;
    let out = cli.out.unwrap_or_else(|| cfg.output.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let modes = cfg.dopf.modes.clone();
    let stage = || -> Result<()> {
        match cli.command {
            Command::Simulate => pipeline::simulate_to(&cfg, &out)?,
            Command::Moments => pipeline::moments_to(&cfg, &out)?,
            Command::Solve => pipeline::solve_to(&cfg, &out, &modes)?,
            Command::Evaluate => {
                let report = pipeline::evaluate_to(&cfg, &out, &modes)?;
                println!("{}", report.to_text(&network_name(&cfg)?));
            }
            Command::Pipeline => {
                let report = pipeline::pipeline_to(&cfg, &out, &modes)?;
                println!("{}", report.to_text(&network_name(&cfg)?));
            }
        }
        Ok(())
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .context("building thread pool")?
            .install(stage),
        None => stage(),
    }
}

fn network_name(cfg: &PipelineConfig) -> Result<String> {
    Ok(pipeline::load_network(cfg)?.name)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evcd: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
