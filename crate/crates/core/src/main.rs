use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match idcsim::cli::run(idcsim::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
