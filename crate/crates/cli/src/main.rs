//! `stochflow` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure
//! (including a training run stopped by a non-finite loss).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;

use args::{Cli, Command};
use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

/// Failure classes, mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<stochflow::Error> for Failure {
    fn from(e: stochflow::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("STOCHFLOW_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Eval(a) => commands::eval(a),
        Command::Classify(a) => commands::classify(a),
        Command::Field(a) => commands::field(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("stochflow: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
