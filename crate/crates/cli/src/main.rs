//! `madogram` command-line tool. See docs/cli.md for flags and file
//! formats.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Cli, CliError};

fn report(err: &CliError) -> ExitCode {
    let body = serde_json::json!({
        "error": { "kind": err.kind(), "message": err.to_string() }
    });
    eprintln!("{body}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Schema(e.render().to_string().trim().to_string())),
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
