//! `ordstat` command-line interface.
//!
//! Exit status: 0 on success, 2 for usage or validation errors, 3 when
//! `--require-faithful` is given and the result cannot be certified.

mod args;
mod bench;
mod common;
mod psi;
mod testing;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::testing::MtpCommand;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Psi(a) => psi::run(a),
        Command::JointVr(a) => testing::run(MtpCommand::JointVr, a),
        Command::Power(a) => testing::run(MtpCommand::Power, a),
        Command::FdpDist(a) => testing::run(MtpCommand::FdpDist, a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ordstat: {e}");
            e.exit_code()
        }
    }
}
