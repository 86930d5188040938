//! `aftnet`: generate synthetic data, train and apply AFTNet models,
//! aggregate metrics and run the built-in checks.

mod cmd;
mod config;
mod pgm;
mod pool;

use std::path::PathBuf;
use std::process::ExitCode;

use aftnet::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "aftnet", version, about = "Learnable Fourier transforms for MR reconstruction")]
struct Cli {
    /// Worker threads for per-sample work; 1 gives bitwise reproducible output.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file and the flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Gen(cmd::gen::GenArgs),
    /// Train a model variant on a dataset.
    Train(cmd::train::TrainArgs),
    /// Reconstruct samples with a trained checkpoint.
    Recon(cmd::recon::ReconArgs),
    /// Aggregate metrics of one or more runs.
    Report(cmd::report::ReportArgs),
    /// Run the oracle and property checks.
    Verify(cmd::verify::VerifyArgs),
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) | Error::NumericDomain(_) | Error::UndefinedMetric(_) => 3,
        Error::Io(_) | Error::Json(_) | Error::Format(_) => 4,
        Error::Config(_) | Error::Usage(_) | Error::Dimension(_) | Error::Pairing(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let res = match cli.command {
        Command::Gen(a) => cmd::gen::run(a, cli.threads),
        Command::Train(a) => cmd::train::run(a),
        Command::Recon(a) => cmd::recon::run(a, cli.threads),
        Command::Report(a) => cmd::report::run(a),
        Command::Verify(a) => cmd::verify::run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
