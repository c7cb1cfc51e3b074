//! Command-line front end for joint DAG estimation: `simulate`, `fit`,
//! `evaluate`, `measures`, `compare` and `cv`. Every command writes its
//! outputs plus a `manifest.json` that can be replayed with `--config`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use commands::Common;
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "jdag",
    version,
    about = "Joint estimation of DAGs across groups"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Simulate(commands::simulate::SimulateArgs),
    Fit(commands::fit::FitArgs),
    Evaluate(commands::evaluate::EvaluateArgs),
    Measures(commands::measures::MeasuresArgs),
    Compare(commands::compare::CompareArgs),
    Cv(commands::cv::CvArgs),
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate(a) => commands::simulate::run(a, c),
        Command::Fit(a) => commands::fit::run(a, c),
        Command::Evaluate(a) => commands::evaluate::run(a, c),
        Command::Measures(a) => commands::measures::run(a, c),
        Command::Compare(a) => commands::compare::run(a, c),
        Command::Cv(a) => commands::cv::run(a, c),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match cli.common.jobs {
        None => dispatch(cli),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(|| dispatch(cli)),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
