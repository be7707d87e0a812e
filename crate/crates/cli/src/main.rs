use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ribc::io::Format;
use ribc_cli::config::{parse_config, Mode, Overrides, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "ribc", version, about = "Bounded-confidence opinion dynamics under random and controlled interactions")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    max_steps: Option<u64>,
    /// Output directory; defaults to $RIBC_OUT_DIR, then ./ribc-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<Format>,
    /// Keep every k-th state of each trajectory.
    #[arg(long, global = true)]
    decimate: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Random-interaction trials with full trajectories.
    Simulate,
    /// Controlled cluster merging from one initial state.
    Cibc,
    /// Table of terminal-time bounds and the subset-probability lower bound.
    Bounds,
    /// Ensemble of random trials with absorption-time and mean-square curves.
    Montecarlo,
    /// Property and dominance battery; exits nonzero on any failure.
    Verify,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: ribc::Error| e.to_string())
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let mode = match cli.verb {
        Verb::Simulate => Mode::Simulate,
        Verb::Cibc => Mode::Cibc,
        Verb::Bounds => Mode::Bounds,
        Verb::Montecarlo => Mode::Montecarlo,
        Verb::Verify => Mode::Verify,
    };
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        max_steps: cli.max_steps,
        out: cli.out,
        format: cli.format,
        decimate: cli.decimate,
    };
    let cfg = parse_config(mode, cli.config.as_deref(), &overrides, std::env::var(OUT_DIR_ENV).ok())?;
    let outcome = ribc_cli::execute(&cfg)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
