use std::process::ExitCode;

use clap::Parser;
use gbd_slice::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
