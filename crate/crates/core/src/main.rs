use std::process::ExitCode;

use clap::Parser;
use lod::cli::{run, Cli};
use lod::LodError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stderr = std::io::stderr();
    match run(&cli, &mut stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ LodError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
