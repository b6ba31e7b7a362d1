use std::process::ExitCode;

use clap::Parser;
use ggmfit_cli::{execute, Cli, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli, &mut std::io::stdout().lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ggmfit: {e:#}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
