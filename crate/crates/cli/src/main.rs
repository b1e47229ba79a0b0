//! `kfree`: identity verification, variance runs and main-term prediction for
//! k-free tuples in arithmetic progressions.
//!
//! Exit status: 0 success, 1 identity or certification failure,
//! 2 configuration error, 3 resource error.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Suite;
use config::Common;

#[derive(Debug, Parser)]
#[command(
    name = "kfree",
    version,
    about = "Variance of k-free tuples in arithmetic progressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an identity suite; exits 1 if any exact check fails.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// V(x,Q) per modulus as CSV rows (q, Σ_a E², cumulative V).
    Variance,
    /// The residue polynomial P and main-term samples as JSON.
    Predict,
    /// Empirical V(x,Q) against the predicted main term.
    Compare,
    /// The Farey dissection of order --gamma.
    Farey,
    /// Magnitude probes of the minor-arc bounds.
    Probe,
}

/// Errors of a run, each with its exit status.
#[derive(Debug)]
pub enum CliError {
    Identity(String),
    Config(String),
    Resource(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Identity(_) => 1,
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Identity(m) => write!(f, "verification failed: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Resource(m) => write!(f, "resource error: {m}"),
        }
    }
}

impl From<kfree_core::Error> for CliError {
    fn from(e: kfree_core::Error) -> Self {
        use kfree_core::Error as E;
        match e {
            E::Config(m) | E::Contract(m) | E::Domain(m) => CliError::Config(m),
            E::Resource(m) | E::Overflow(m) | E::Io(m) => CliError::Resource(m),
            E::Precision(m) => CliError::Identity(m),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Resource(format!("JSON serialisation failed: {e}"))
    }
}

fn emit(rc: &config::RunConfig, text: &str) -> Result<(), CliError> {
    match &rc.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Resource(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Resource(format!("cannot write output: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let rc = cli.common.resolve()?;
    if let Some(n) = rc.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Resource(format!("cannot start {n} worker threads: {e}")))?;
    }
    let (text, ok, what) = match cli.command {
        Command::Verify { suite } => {
            let (t, ok) = commands::verify(&rc, suite)?;
            (t, ok, "an exact identity check failed")
        }
        Command::Variance => (commands::variance(&rc)?, true, ""),
        Command::Predict => {
            let (t, ok) = commands::predict(&rc)?;
            (t, ok, "residue polynomial not certified")
        }
        Command::Compare => (commands::compare(&rc)?, true, ""),
        Command::Farey => (commands::farey(&rc)?, true, ""),
        Command::Probe => (commands::probe(&rc)?, true, ""),
    };
    emit(&rc, &text)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Identity(what.to_string()))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kfree: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
