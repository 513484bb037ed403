//! `carid`: fit vehicle models from logs, simulate scenarios, generate
//! synthetic log suites and score models against held-out logs.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod fit;
mod generate;
mod io;
mod logs;
mod simulate;
mod svg;
mod validate;

#[derive(Debug, Parser)]
#[command(name = "carid", version, about = "System identification and simulation for small car-like robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every sub-model from a directory of tagged logs.
    Fit(fit::FitArgs),
    /// Simulate one scenario and write its trajectory and plots.
    Simulate(simulate::SimulateArgs),
    /// Write the synthetic experiment battery as tagged log CSVs.
    Generate(generate::GenerateArgs),
    /// One-step-ahead prediction error of a model on a log.
    Validate(validate::ValidateArgs),
}

/// Exit status when `fit` finished but a requested stage did not complete.
const EXIT_INCOMPLETE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => fit::run(a).map(|status| match status {
            fit::FitStatus::Complete => ExitCode::SUCCESS,
            fit::FitStatus::Incomplete => ExitCode::from(EXIT_INCOMPLETE),
        }),
        Command::Simulate(a) => simulate::run(a).map(|_| ExitCode::SUCCESS),
        Command::Generate(a) => generate::run(a).map(|_| ExitCode::SUCCESS),
        Command::Validate(a) => validate::run(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
