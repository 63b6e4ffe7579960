//! `smallgain`: check small-gain conditions, build paths and certificates,
//! and verify them by simulation from a JSON network config.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "smallgain", version, about = "Small-gain ISS certification for networks of subsystems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sum,
    Max,
    Separated,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON network config.
    config: PathBuf,
    /// Output file (directory for `certify`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Radius at which upward path chaining stops.
    #[arg(long, default_value_t = 1e6, allow_negative_numbers = true)]
    rmax: f64,
    /// Seed for every randomized step. SMALLGAIN_SEED takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of log-spaced radii of the falsification grid.
    #[arg(long, default_value_t = 40)]
    grid: usize,
    /// How the external input enters the certificate; general when omitted.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Multiplies the path by this factor after composition (negative control).
    #[arg(long, hide = true, allow_negative_numbers = true)]
    scale_sigma: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide the small gain condition.
    Check(Common),
    /// Construct and validate a path and write it as CSV.
    Path(Common),
    /// Compose the Lyapunov function and write the certificate bundle.
    Certify(Common),
    /// Integrate the model and write the trajectory as CSV.
    Simulate(Common),
    /// Sampled decrease and trajectory checks of the certificate.
    Verify(Common),
}

fn resolve_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("SMALLGAIN_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("SMALLGAIN_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

type Handler = fn(&commands::Context) -> Result<u8, CliError>;

fn run(cli: Cli) -> Result<u8, CliError> {
    let (run, mut common): (Handler, Common) = match cli.command {
        Command::Check(c) => (commands::check, c),
        Command::Path(c) => (commands::path, c),
        Command::Certify(c) => (commands::certify, c),
        Command::Simulate(c) => (commands::simulate, c),
        Command::Verify(c) => (commands::verify, c),
    };
    common.seed = resolve_seed(common.seed)?;
    let ctx = commands::Context::load(common)?;
    run(&ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
