use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use nlneumann_cli::{run, Cli, CliError};
use serde_json::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let err = CliError::Validation(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let (stdout, warnings, failure) = match run(cli) {
        Ok(outcome) => (outcome.stdout, outcome.warnings, outcome.failure),
        Err(e) => (String::new(), Vec::new(), Some(e)),
    };
    for w in &warnings {
        eprintln!("{}", json!({ "warning": w }));
    }
    let mut out = std::io::stdout().lock();
    if out
        .write_all(stdout.as_bytes())
        .and_then(|_| out.flush())
        .is_err()
    {
        return ExitCode::from(1);
    }
    match failure {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
