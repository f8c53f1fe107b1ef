use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(wtk_cli::execute(wtk_cli::Cli::parse()))
}
