//! `fracevo <command> [--config FILE] [--seed U64] [--out DIR] [key=value ...]`
//!
//! Exit status: 0 on success, 1 when a verification command misses its
//! tolerance, 2 on configuration or runtime errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Locality functional table over (delta, gamma)
    Table1,
    /// Stationary covariance: closed form, quadrature and Monte Carlo
    Matern,
    /// Write sample ensembles as CSV or binary
    Sample,
    /// Restart and reconstruction checks of the Markov solver
    Restart,
    /// Transition operator and Chapman-Kolmogorov composition
    Transition,
    /// Fractional Q-Wiener covariance checks and sampling
    Fbm,
    /// Convergence rate of the epsilon -> 0 limit
    Limit,
    /// Integrability assumption on the model
    Validate,
}

#[derive(Debug, Parser)]
#[command(name = "fracevo", version, about = "Experiments for fractional stochastic evolution equations")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON document with command keys; flags and overrides take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, `--key value` or `--key=value`
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    overrides: Vec<String>,
}

fn init_threads() -> Result<Option<usize>> {
    match std::env::var("FRACEVO_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("FRACEVO_THREADS={v:?} is not a count"))?;
            if n == 0 {
                bail!("FRACEVO_THREADS must be at least 1");
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let threads = init_threads()?;
    let cfg = RunConfig::build(cli.config.as_deref(), cli.seed, cli.out, &cli.overrides)?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let name = cli.command.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let start = Instant::now();
    let outcome = match cli.command {
        Command::Table1 => commands::table1(&cfg),
        Command::Matern => commands::matern(&cfg),
        Command::Sample => commands::sample(&cfg),
        Command::Restart => commands::restart(&cfg),
        Command::Transition => commands::transition(&cfg),
        Command::Fbm => commands::fbm(&cfg),
        Command::Limit => commands::limit(&cfg),
        Command::Validate => commands::validate(&cfg),
    }?;
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "inputs": cfg.echo(),
        "threads": threads.unwrap_or_else(rayon::current_num_threads),
        "outputs": outcome.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "passed": outcome.passed,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    std::fs::write(cfg.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("{}", outcome.summary);
    if outcome.passed {
        println!("{name}: ok");
    } else {
        eprintln!("{name}: tolerance breach");
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
