use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = shieldscatter_cli::Cli::parse();
    match shieldscatter_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(shieldscatter_cli::exit_code(&err))
        }
    }
}
