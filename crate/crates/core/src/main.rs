use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match tokscope::cli::run(tokscope::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
