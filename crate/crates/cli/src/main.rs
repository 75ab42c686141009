//! `ofdm-toa` — batch CLI for TOA error bounds, estimator Monte Carlo,
//! pilot-allocation search, and LEO positioning campaigns.
//!
//! Every run reads one JSON config, writes CSV/JSON outputs plus a
//! `manifest.json` into `--out`, and is bit-reproducible: the same config and
//! seed yield byte-identical outputs regardless of worker count.

mod config;
mod fail;
mod jobs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fail::{usage, CliError};
use jobs::Overrides;

#[derive(Parser)]
#[command(
    name = "ofdm-toa",
    version,
    about = "TOA error bounds, estimators, pilot allocation search, and LEO positioning for OFDM ranging",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct JobArgs {
    /// JSON run config (must declare `schema_version` and `job`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Override the config's seed (channel seed for bounds/zzb, pilot seed
    /// for prs-search, master seed otherwise).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the data-parallel kernels (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the z-grid step in samples (estimator scan or bound grid,
    /// whichever the job uses).
    #[arg(long)]
    zstep: Option<f64>,
    /// Override the φ-grid step in radians.
    #[arg(long)]
    phistep: Option<f64>,
    /// Override the Gauss-Hermite quadrature order.
    #[arg(long, value_name = "N")]
    gh_order: Option<usize>,
}

impl JobArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            zstep: self.zstep,
            phistep: self.phistep,
            gh_order: self.gh_order,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pilot CRLB, modified CRLB, and exact data CRLB over an SNR sweep.
    Bounds(JobArgs),
    /// Ziv-Zakai bound over an SNR sweep (optionally with the Pmin profile).
    Zzb(JobArgs),
    /// Run the estimators once on a single synthesized observation.
    Estimate(JobArgs),
    /// Monte Carlo estimator RMSE sweep with optional attached bounds.
    Mc(JobArgs),
    /// Exhaustive pilot-block allocation search ranked by the Ziv-Zakai bound.
    PrsSearch(JobArgs),
    /// LEO pseudorange positioning campaign.
    Leo(JobArgs),
    /// Check a config against its declared job's schema without running it.
    Validate {
        /// JSON run config to check.
        #[arg(long)]
        config: PathBuf,
    },
}

/// Sizes the global worker pool before any parallel kernel runs.
#[cfg(feature = "parallel")]
fn init_workers(workers: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("initializing worker pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_workers(workers: Option<usize>) -> Result<(), CliError> {
    match workers {
        Some(0) => Err(usage("--workers must be at least 1")),
        Some(n) if n > 1 => {
            eprintln!("warning: built without the `parallel` feature; running sequentially");
            Ok(())
        }
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Bounds(a) => {
            init_workers(a.workers)?;
            jobs::run_bounds(&a.config, &a.out, a.overrides())
        }
        Command::Zzb(a) => {
            init_workers(a.workers)?;
            jobs::run_zzb(&a.config, &a.out, a.overrides())
        }
        Command::Estimate(a) => {
            init_workers(a.workers)?;
            jobs::run_estimate(&a.config, &a.out, a.overrides())
        }
        Command::Mc(a) => {
            init_workers(a.workers)?;
            jobs::run_mc(&a.config, &a.out, a.overrides())
        }
        Command::PrsSearch(a) => {
            init_workers(a.workers)?;
            jobs::run_prs_search(&a.config, &a.out, a.overrides())
        }
        Command::Leo(a) => {
            init_workers(a.workers)?;
            jobs::run_leo(&a.config, &a.out, a.overrides())
        }
        Command::Validate { config } => jobs::run_validate(config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version to stdout (exit 0) and usage errors to
            // stderr (exit 2).
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
