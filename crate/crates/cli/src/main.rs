//! `slatediv` — intent-aware slate diversification harness.
//!
//! Subcommands: `diversify` (one-shot slate from a JSONL input), `simulate`
//! (paired control/treatment synthetic-user experiment), `sweep-gamma`
//! (diversification-strength sweep against a shared control), `train-intent`
//! (fit and evaluate the intent predictor on a JSONL dataset) and `analyze`
//! (prediction-percentile slicing plus arm comparison over logged runs).
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }

    /// Core-library errors raised while processing data files.
    pub fn data(err: impl std::fmt::Display) -> Self {
        CliError::Data(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "slatediv",
    version,
    about = "Intent-aware slate diversification harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diversify one candidate file into a ranked slate with a trace.
    Diversify {
        /// JSONL file with one prior record and one record per candidate.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// paper-literal, exact-bayes or unnormalized.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Run the synthetic-user experiment for one or both arms.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// control, treatment or both.
        #[arg(long)]
        arm: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Sweep diversification strengths against a shared control.
    SweepGamma {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<String>,
        /// Concurrent sweep points (bounded worker pool).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train the intent predictor on a JSONL dataset and evaluate it.
    TrainIntent {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Slice paired runs by predicted intent and compare arms.
    Analyze {
        /// Output directory of a treatment `simulate` run.
        #[arg(long)]
        treatment: PathBuf,
        /// Output directory of the paired control run.
        #[arg(long)]
        control: PathBuf,
        /// Trained parameter file used to score logged pages.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        buckets: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Diversify {
            input,
            out,
            config,
            seed,
            gamma,
            mode,
        } => commands::diversify::run(&input, &out, config.as_deref(), seed, gamma, mode),
        Command::Simulate {
            out,
            config,
            seed,
            arm,
            gamma,
            mode,
        } => commands::simulate::run(&out, config.as_deref(), seed, arm, gamma, mode),
        Command::SweepGamma {
            out,
            config,
            seed,
            mode,
            workers,
        } => commands::sweep::run(&out, config.as_deref(), seed, mode, workers),
        Command::TrainIntent {
            dataset,
            out,
            config,
            seed,
            epochs,
        } => commands::train::run(&dataset, &out, config.as_deref(), seed, epochs),
        Command::Analyze {
            treatment,
            control,
            params,
            out,
            config,
            seed,
            buckets,
        } => commands::analyze::run(
            &treatment,
            &control,
            &params,
            &out,
            config.as_deref(),
            seed,
            buckets,
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
