//! `mnac`: bound evaluation, simulation, phase-curve sweeps, growth-order
//! classification and the verification suite, with JSON or CSV output.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use config::{Format, Resolver, RunConfig, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "mnac", version, about = "Gaussian many-access channel bounds and simulation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat JSON file of parameters; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulation worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every applicable bound for (M, E, N0), optionally with TDMA (n, k).
    Bounds(commands::BoundsArgs),
    /// Monte Carlo error estimate of PPM or a TDMA system of PPM users.
    Simulate(commands::SimulateArgs),
    /// Orthogonal-access capacity per unit energy over a grid of c.
    Sweep(commands::SweepArgs),
    /// Feasibility regime for k_n = Θ(n^a (log n)^b).
    Classify(commands::ClassifyArgs),
    /// Run the acceptance suite; exit 1 on any failure.
    Verify(commands::VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bounds(_) => "bounds",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Classify(_) => "classify",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or parameters: exit 2.
    Usage(String),
    /// A required parameter was given neither as a flag nor in the config.
    Missing(&'static str),
    /// Checks ran and some failed: exit 1.
    Verification(String),
    /// I/O and other runtime errors: exit 1.
    Runtime(anyhow::Error),
}

impl From<mnac::Error> for Failure {
    fn from(e: mnac::Error) -> Self {
        match e {
            mnac::Error::Io { .. } => Failure::Runtime(e.into()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut res = Resolver::load(cli.global.config.as_deref())?;
    let output_path = res.global("output", cli.global.output)?;
    let output_format = res.global("format", cli.global.format)?.unwrap_or(Format::Json);
    let seed = res.global("seed", cli.global.seed)?.unwrap_or(DEFAULT_SEED);
    let workers = res.global("workers", cli.global.workers)?;
    if let Some(w) = workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    let name = cli.command.name();
    let prepared = match cli.command {
        Command::Bounds(a) => commands::bounds(a, &mut res)?,
        Command::Simulate(a) => commands::simulate(a, &mut res, seed)?,
        Command::Sweep(a) => commands::sweep(a, &mut res)?,
        Command::Classify(a) => commands::classify(a, &mut res)?,
        Command::Verify(a) => commands::verify(a, &mut res, seed)?,
    };
    let unknown = res.unknown_keys();
    if !unknown.is_empty() {
        return Err(Failure::Usage(format!("unknown config keys for {name}: {}", unknown.join(", "))));
    }
    let cfg = RunConfig {
        command: name,
        parameters: res.parameters,
        output_path,
        output_format,
        seed,
        workers,
    };
    let report = prepared.run()?;
    output::emit(&cfg, &report)?;
    match report.failure {
        Some(msg) => Err(Failure::Verification(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sub = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Missing(key)) => {
            let mut cmd = Cli::command();
            let sub = cmd.find_subcommand_mut(sub).cloned().unwrap_or(cmd);
            let name = format!("mnac {}", sub.get_name());
            let mut sub = sub.bin_name(name);
            sub.error(
                ErrorKind::MissingRequiredArgument,
                format!("--{} is required (as a flag or in the config file)", key.replace('_', "-")),
            )
            .exit()
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
