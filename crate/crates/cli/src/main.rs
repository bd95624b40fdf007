//! `sparsevary` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or malformed input, 4 infeasible
//! budget, 5 internal failure.

mod args;
mod commands;
mod error;
mod standardize;

use std::process::ExitCode;

use args::Command;
use error::CliError;

fn run() -> Result<(), CliError> {
    let cli = args::parse(std::env::args_os())?;
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Synth(a) => commands::synth(a),
        Command::Gridsearch(a) => commands::gridsearch(a),
        Command::Selftest(a) => commands::selftest(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(CliError::Clap(e).exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
