//! `preq` — prequential verification of sequential risk forecasts from the
//! command line.
//!
//! Every subcommand reads and writes plain CSV/JSON so stages can be piped
//! into each other or into external plotting tools. Outputs are a pure
//! function of inputs, flags and seeds: rerunning a command reproduces its
//! artifacts byte for byte.
//!
//! Exit codes: 0 on success, 1 when arguments or input data fail
//! validation, 2 when a runtime failure (I/O, model misbehavior) occurs.

mod commands;
mod config;
mod failure;
mod predictor_spec;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
