mod args;
mod output;
mod pipeline;
mod svg;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use pipeline::Stage;

#[derive(Debug)]
pub enum CliError {
    /// Bad input data or arguments; exit status 2.
    Validation(String),
    /// Numerical or I/O failure; exit status 1.
    Runtime(String),
}

impl CliError {
    fn core<E: Into<frailty_core::Error>>(e: E) -> Self {
        let e = e.into();
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => pipeline::run_input(Stage::Ingest, a),
        Command::Fi(a) => pipeline::run_input(Stage::Fi, a),
        Command::Corr(a) => pipeline::run_input(Stage::Corr, a),
        Command::Pa(a) => pipeline::run_pa(a),
        Command::Efa(a) => pipeline::run_factor(Stage::Efa, a),
        Command::Scores(a) => pipeline::run_factor(Stage::Scores, a),
        Command::Regress(a) => pipeline::run_factor(Stage::Regress, a),
        Command::Report(a) => pipeline::run_factor(Stage::Report, a),
        Command::Synth(a) => pipeline::run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
