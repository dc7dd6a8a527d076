//! `frlsc`: train, apply and check functional RLSC models.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data or file-format
//! error, 4 numerical failure, 5 a verify check exceeded its bound.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Settings;

#[derive(Debug, Parser)]
#[command(
    name = "frlsc",
    version,
    about = "Functional regularized least squares classification"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Flat TOML file with default settings; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Train a one-vs-all functional model and write it to --model
    Train(Settings),
    /// Classify every observation of --data with --model
    Predict(Settings),
    /// Confusion matrix of --model on the labeled --data
    Evaluate(Settings),
    /// Functional vs scalar RLSC on identical splits with identical tuning
    Benchmark(Settings),
    /// Numerical self-checks against dense oracles
    Verify(Settings),
    /// Write a synthetic dataset to --output
    Synth(Settings),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(commands::CliError::config(vec![
                "workers: must be at least 1".into(),
            ]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| commands::CliError::config(vec![format!("workers: {e}")]))?;
    }
    let file = match &cli.config {
        Some(path) => Settings::load(path).map_err(|e| commands::CliError::config(vec![e]))?,
        None => Settings::default(),
    };
    let (name, flags) = match &cli.verb {
        Verb::Train(s) => ("train", s),
        Verb::Predict(s) => ("predict", s),
        Verb::Evaluate(s) => ("evaluate", s),
        Verb::Benchmark(s) => ("benchmark", s),
        Verb::Verify(s) => ("verify", s),
        Verb::Synth(s) => ("synth", s),
    };
    let settings = file.overlay(flags);
    let mut ctx = commands::Context::new(name, settings, cli.config.clone());
    match cli.verb {
        Verb::Train(_) => commands::train(&mut ctx),
        Verb::Predict(_) => commands::predict(&mut ctx),
        Verb::Evaluate(_) => commands::evaluate(&mut ctx),
        Verb::Benchmark(_) => commands::benchmark(&mut ctx),
        Verb::Verify(_) => commands::verify(&mut ctx),
        Verb::Synth(_) => commands::synth(&mut ctx),
    }
}
