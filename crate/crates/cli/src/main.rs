//! `dp-robust` command-line front end.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for data errors,
//! 4 for numeric failures. Failures print a single line to stderr,
//! `dp-robust: <category>: <detail>`.

mod commands;
mod options;

use std::process::ExitCode;

use clap::Parser;
use dp_robust::Error;

use options::{resolve, Cli, Command};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Domain(_) => 2,
        Error::Data(_) | Error::Input(_) | Error::Shape { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = cli.config.as_deref();
    let name = cli.command.name();
    let out = cli.out.as_path();
    match &cli.command {
        Command::Fit(a) => {
            let a = resolve(a, cfg, name)?;
            commands::prepare_out(out)?;
            commands::fit(&a, out)
        }
        Command::EnsembleCache(a) => {
            let a = resolve(a, cfg, name)?;
            commands::prepare_out(out)?;
            commands::ensemble_cache(&a, out)
        }
        Command::Simulate(a) => {
            let a = resolve(a, cfg, name)?;
            commands::prepare_out(out)?;
            commands::simulate(&a, out)
        }
        Command::Cv(a) => {
            let a = resolve(a, cfg, name)?;
            commands::prepare_out(out)?;
            commands::cross_validate(&a, out)
        }
        Command::Replicate(a) => {
            let a = resolve(a, cfg, name)?;
            commands::prepare_out(out)?;
            commands::replicate(&a, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("dp-robust: configuration error: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dp-robust: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
