//! `ruin`: batch front end for the ruin-core library.
//!
//! Exit codes: 0 success, 1 validation failure, 2 config error, 3 compute error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod grid;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use crate::commands::Command;
use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{emit, RunStamp};

#[derive(Debug, Parser)]
#[command(name = "ruin", version, about = "Joint law of ruin time and claim count for the perturbed risk model")]
struct Cli {
    /// TOML run configuration; built-in desk model when absent.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set model.sigma=0.5`. Repeatable; applied in order.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Significant digits of numeric output (1..=17).
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Serialize)]
struct Run<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    command: &'a Command,
}

fn threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RUIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("RUIN_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("RUIN_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    threads()?;
    let mut resolved = config::load(cli.config.as_deref(), &cli.overrides)?.resolve()?;
    let out = &mut resolved.config.output;
    out.format = cli.format.unwrap_or(out.format);
    out.path = cli.output.or(out.path.take());
    out.precision = cli.precision.unwrap_or(out.precision);
    if !(1..=17).contains(&out.precision) {
        return Err(CliError::Config(format!("`output.precision` must lie in 1..=17, got {}", out.precision)));
    }
    cli.command.apply_flags(&mut resolved)?;

    let mut hashed = resolved.config.clone();
    hashed.output.path = None;
    let stamp = RunStamp::new(&Run { config: &hashed, command: &cli.command })?;
    let table = cli.command.run(&resolved, &stamp)?;
    emit(&table, &stamp, &resolved.config.output)?;
    if matches!(cli.command, Command::Validate) {
        let failed = validate::failures(&table);
        if !failed.is_empty() {
            return Err(CliError::Validation(failed.join(", ")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ruin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
