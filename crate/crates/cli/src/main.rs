//! `fsp`: personalize a black-box predictor from a small labeling budget.

mod config;
mod error;
mod eval;
mod personalize;
mod predict;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fsp", version, about = "Personalize a black-box predictor under a labeling budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation scenario and write per-repetition and summary CSVs.
    Simulate(simulate::SimulateArgs),
    /// Retrieve labels, fit a personalized estimator and save it.
    Personalize(personalize::PersonalizeArgs),
    /// Evaluate a saved estimator on query points.
    Predict(predict::PredictArgs),
    /// Score predictions against truth with mse or mce.
    Eval(eval::EvalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Personalize(a) => personalize::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Eval(a) => eval::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
