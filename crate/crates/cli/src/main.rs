//! `cryodbr`: phonon-flux simulation, heater-sweep analysis, geometry search
//! and packaging heat budgets.
//!
//! Exit codes: 0 success, 1 input error, 2 computation flag (non-convergence,
//! failed budget item, flagged outliers, exhausted evaluation budget).

mod analyze;
mod budget;
mod calibrate;
mod optimize;
mod output;
mod simulate;
mod svg;
mod synthetic;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cryodbr", version, about)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract I(T)/L curves from heater sweeps.
    Analyze(analyze::Args),
    /// Tabulate the transmitted phonon flux of a stack.
    Simulate(simulate::Args),
    /// Search graded stack geometries for the lowest flux.
    Optimize(optimize::Args),
    /// Evaluate a packaging heat-budget scenario.
    Budget(budget::Args),
    /// Leave-one-out check of sensor calibrations.
    CalibrateCheck(calibrate::Args),
    /// Write a synthetic heater-sweep dataset from a known I(T)/L.
    GenSynthetic(synthetic::Args),
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Input(anyhow::Error),
    Computation(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Input(e)
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Outputs were written, but something needs attention.
    Flagged(Vec<String>),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Analyze(a) => analyze::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Optimize(a) => optimize::run(a),
        Command::Budget(a) => budget::run(a),
        Command::CalibrateCheck(a) => calibrate::run(a),
        Command::GenSynthetic(a) => synthetic::run(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Flagged(notes)) => {
            for n in notes {
                eprintln!("flagged: {n}");
            }
            ExitCode::from(2)
        }
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Computation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
