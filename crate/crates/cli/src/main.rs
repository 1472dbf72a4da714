//! `eslr`: run evolution strategies, estimate their rates and check the
//! step-size divergence condition from JSON experiment configs.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Output;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "eslr", version, about = "Step-size adaptive evolution strategies: runs, rates and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ES and write its trace as CSV.
    Run(Common),
    /// Estimate the convergence or divergence rate (JSON).
    Rate(Common),
    /// Evaluate the step-size increase condition on linear functions (JSON).
    Condition(Common),
    /// Drift ratios of the sigma-normalized chain over a grid of ||z|| (JSON).
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N", env = "ESLR_THREADS")]
    threads: Option<usize>,
    /// Defaults to standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn write_output(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}"))),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, command): (&Common, fn(&config::Resolved) -> Result<Output, CliError>) = match &cli.command {
        Command::Run(c) => (c, commands::cmd_run),
        Command::Rate(c) => (c, commands::cmd_rate),
        Command::Condition(c) => (c, commands::cmd_condition),
        Command::Diagnose(c) => (c, commands::cmd_diagnose),
    };
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    let resolved = config::resolve(config::load(&common.config)?, common.seed)?;
    let output = command(&resolved)?;
    write_output(&common.out, &output.bytes)?;
    match output.abort {
        Some(reason) => Err(CliError::Numerical(reason)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("eslr: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(4),
    }
}
