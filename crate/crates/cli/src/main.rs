mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use posthoc_core::Error;

use args::Cli;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Param(_) => 2,
        Error::Format(_) | Error::Io(_) | Error::Json(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
