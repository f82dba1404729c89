use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = axiflow::cli::Cli::parse();
    match axiflow::cli::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
