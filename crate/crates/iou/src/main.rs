use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = iou::cli::Cli::parse();
    match iou::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
