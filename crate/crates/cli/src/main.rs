//! `locmom`: position-conditioned moments of quantum observables from the
//! command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical precondition
//! failure, 4 internal self-check failure. Errors are reported on stderr as a
//! single JSON line.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use locmom_core::Error;
use serde_json::json;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "locmom",
    version,
    about = "Local averages and local variances of quantum observables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Local moment or variance profiles as CSV (q,value,mask,definition,order) or JSON.
    Moments(RunConfig),
    /// Law-of-total-variance split per definition, checked against the direct variance.
    Decompose(RunConfig),
    /// Wigner, Margenau-Hill or classical phase-space array plus metadata.
    Distribution(RunConfig),
    /// Split-step evolution with continuity and Euler residual report.
    Evolve(RunConfig),
}

fn exit_code(err: &Error) -> (u8, &'static str) {
    match err {
        Error::Precondition(_) => (3, "precondition"),
        Error::SelfCheck(_) => (4, "self_check"),
        Error::Grid(_) | Error::Input(_) | Error::Io(_) => (2, "config"),
    }
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    let message = message.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    let line = json!({ "error": kind, "exit_code": code, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), String> {
    let Ok(text) = std::env::var("LOCMOM_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .trim()
        .parse()
        .map_err(|_| format!("LOCMOM_THREADS: expected a non-negative integer, got '{text}'"))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| format!("LOCMOM_THREADS: {e}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(2, "config", &e.to_string()),
    };
    if let Err(msg) = configure_threads() {
        return fail(2, "config", &msg);
    }
    let (run, flags): (fn(&config::Resolved) -> locmom_core::Result<_>, RunConfig) = match cli.command {
        Command::Moments(c) => (commands::moments, c),
        Command::Decompose(c) => (commands::decompose, c),
        Command::Distribution(c) => (commands::distribution, c),
        Command::Evolve(c) => (commands::evolve, c),
    };
    let outcome = flags.resolve().and_then(|cfg| run(&cfg));
    match outcome {
        Ok(Some(report)) => {
            let mut out = std::io::stdout().lock();
            let _ = serde_json::to_writer_pretty(&mut out, &report);
            let _ = writeln!(out);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        // The reader went away (`| head`); nothing left to report to.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            fail(code, kind, &e.to_string())
        }
    }
}
