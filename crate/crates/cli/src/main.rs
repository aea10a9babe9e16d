//! `mdiqkd`: key-rate scans, decoy round trips, relay outcome tables and
//! HOM sweeps from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mdiqkd::Exec;

use crate::error::CliError;
use crate::output::Report;

#[derive(Debug, Parser)]
#[command(
    name = "mdiqkd",
    version,
    about = "MDI-QKD relay, decoy-state and key-rate simulator"
)]
struct Cli {
    /// Flat TOML file of parameters, or a previous output file to rerun.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Evaluate on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimized key rate against total fiber length.
    Keyrate(commands::keyrate::Args),
    /// Synthesize decoy observations and recover yields and error rates.
    Decoy(commands::decoy::Args),
    /// Outcome probabilities for all sixteen BB84 input pairs.
    Bsm(commands::bsm::Args),
    /// Normalized coincidence against relative delay.
    Hom(commands::hom::Args),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let report: Report = match &cli.command {
        Command::Keyrate(args) => {
            let table = config::load(cli.config.as_deref(), commands::keyrate::NAME)?;
            commands::keyrate::run(&config::resolve(table, args)?, exec)?
        }
        Command::Decoy(args) => {
            let table = config::load(cli.config.as_deref(), commands::decoy::NAME)?;
            commands::decoy::run(&config::resolve(table, args)?, exec)?
        }
        Command::Bsm(args) => {
            let table = config::load(cli.config.as_deref(), commands::bsm::NAME)?;
            commands::bsm::run(&config::resolve(table, args)?)?
        }
        Command::Hom(args) => {
            let table = config::load(cli.config.as_deref(), commands::hom::NAME)?;
            commands::hom::run(&config::resolve(table, args)?, exec)?
        }
    };
    report.emit(cli.format, cli.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::usage(e.to_string()).report(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
