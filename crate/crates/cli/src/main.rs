//! Command-line surface: dataset generation, training, evaluation, invariant
//! extraction, unification traces, reporting, and numeric self checks.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure.

mod commands;

use clap::Parser;

fn main() {
    let args = match commands::Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // Help and version requests are successes.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(args) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                softuni_core::Error::Shape(_)
                | softuni_core::Error::Vocab(_)
                | softuni_core::Error::Argument(_)
                | softuni_core::Error::Config(_)
                | softuni_core::Error::Parse { .. } => 1,
                softuni_core::Error::Diverged(_)
                | softuni_core::Error::Io(_)
                | softuni_core::Error::Json(_) => 2,
            };
            std::process::exit(code);
        }
    }
}
