//! Library side of the `dldl` command-line tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;

use clap::Parser;

pub use config::RunConfig;
pub use error::{exit_code, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = match &parsed.command {
        cli::Command::Encode(a) => commands::encode::run(a, out, err),
        cli::Command::Train(a) => commands::train::run(a, out),
        cli::Command::Eval(a) => commands::eval::run(a, out),
        cli::Command::Compare(a) => commands::compare::run(a, out),
        cli::Command::Gradcheck(a) => commands::gradcheck::run(a, out),
        cli::Command::Interpret(a) => commands::interpret::run(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}
