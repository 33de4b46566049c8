//! `bsnn`: reproducible pipelines over binary spiking networks.
//!
//! Exit status: 0 success, 2 configuration, 3 data, 4 solver, 5 failed
//! certificate or verification, 1 anything else.

mod args;
mod commands;
mod exit;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli.command) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::exit_kind(&e) as u8)
        }
    }
}
