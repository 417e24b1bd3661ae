use std::process::ExitCode;

use clap::Parser;
use ovtv::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = std::env::args().skip(1).collect();
    match execute(cli, args, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
