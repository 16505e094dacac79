mod attack;
mod audit;
mod bench;
mod config;
mod error;
mod gen;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunFile;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "leakfit", version, about = "Re-identify importers in sanitized trade releases")]
struct Cli {
    /// Run file of `key = value` lines; flags override it.
    #[arg(long, global = true, env = "LEAKFIT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world and write its release and ground truth.
    Gen(gen::GenArgs),
    /// Attack transactions of a release.
    Attack(attack::AttackArgs),
    /// Compare the state summary against the de-identified transactions.
    Audit(audit::AuditArgs),
    /// Time the solver on planted instances of growing complexity.
    Bench(bench::BenchArgs),
    /// Solve one instance given as package and bin CSV files.
    Solve(solve::SolveArgs),
}

/// First of flag, run file, default.
pub(crate) fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub(crate) fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Config(format!("missing {name}: pass it as a flag or in the run file")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => RunFile::load(path)?,
        None => RunFile::default(),
    };
    match cli.command {
        Command::Gen(args) => gen::run(args, file),
        Command::Attack(args) => attack::run(args, file),
        Command::Audit(args) => audit::run(args, file),
        Command::Bench(args) => bench::run(args, file),
        Command::Solve(args) => solve::run(args, file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
