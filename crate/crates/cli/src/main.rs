//! `rusamp`: run repeat-until-success protocols, regenerate the figure
//! datasets and print T-gate cost estimates.
//!
//! Exit status: 0 on success, 2 on invalid configuration, 3 when more than
//! 0.1% of simulated trials hit the attempt cap, 1 on I/O failure.

mod commands;
mod manifest;
mod protocol;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use protocol::{PsiSpec, Protocol};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Quality(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Quality(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Quality(m) => write!(f, "{m}"),
        }
    }
}

impl From<rusamp_core::Error> for CliError {
    fn from(e: rusamp_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "rusamp", version, about = "Repeat-until-success circuits with amplitude amplification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FigureName {
    #[value(name = "fig1-left")]
    Fig1Left,
    #[value(name = "fig1-right")]
    Fig1Right,
    #[value(name = "fig2")]
    Fig2,
    #[value(name = "fig3")]
    Fig3,
    #[value(name = "figd1")]
    FigD1,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a circuit from a JSON spec and run it until success.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// none, standard:J, deterministic, pi3:K[:neg] or fp:DELTA[:WBOUND]
        #[arg(long, default_value = "none")]
        protocol: Protocol,
        /// 0, 1, +, -, random, or re,im,re,im
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        psi: PsiSpec,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = rusamp_core::rus::DEFAULT_MAX_ATTEMPTS)]
        max_attempts: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Regenerate a figure dataset as CSV.
    Figure {
        name: FigureName,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// T-gate cost of every strategy for one configuration.
    Tcost {
        #[arg(long)]
        lambda0: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long = "ct-a", default_value_t = 1.0)]
        ct_a: f64,
        /// kmm, zero or fixed:V
        #[arg(long, default_value = "kmm", value_parser = protocol::parse_policy)]
        reflection_policy: rusamp_core::tcost::ReflectionPolicy,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("RUSAMP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("RUSAMP_THREADS=`{value}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { spec, protocol, psi, trials, seed, max_attempts, out } => {
            commands::simulate(&commands::SimulateArgs { spec, protocol, psi, trials, seed, max_attempts, out })
        }
        Command::Figure { name, seed, out } => commands::figure(name, seed, &out),
        Command::Tcost { lambda0, delta, ct_a, reflection_policy } => {
            commands::tcost(lambda0, delta, ct_a, reflection_policy)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rusamp: {e}");
            ExitCode::from(e.code())
        }
    }
}
