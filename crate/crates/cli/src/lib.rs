//! Batch runner: simulate panels, fit them, extract networks and score fits
//! against a known truth. Every command writes `manifest.txt`, a complete
//! configuration that reproduces the run.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Parser)]
#[command(name = "tdvar", version, about = "Tucker-decomposed Bayesian VAR runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel and its generating system.
    Simulate(CommonArgs),
    /// Run the Gibbs sampler on a panel.
    Fit(CommonArgs),
    /// Granger-causality networks from a finished fit.
    Gc(CommonArgs),
    /// Score a finished fit against the simulated truth.
    Metrics(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint to continue from (`fit` only).
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Gc(_) => "gc",
            Command::Metrics(_) => "metrics",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::Fit(a) | Command::Gc(a) | Command::Metrics(a) => a,
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cmd = &cli.command;
    let args = cmd.args();
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.resume.is_some() && !matches!(cmd, Command::Fit(_)) {
        return Err(CliError::Usage(format!("--resume applies only to fit, not {}", cmd.name())));
    }
    let out = &args.out;
    let notes = match cmd {
        Command::Simulate(_) => commands::simulate::run(&cfg, out)?,
        Command::Fit(_) => commands::fit::run(&cfg, out, args.resume.as_deref())?,
        Command::Gc(_) => commands::gc::run(&cfg, out)?,
        Command::Metrics(_) => commands::metrics::run(&cfg, out)?,
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, cfg.manifest(cmd.name(), &notes)).map_err(|e| CliError::io(&path, e))
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// go to standard error as a single `error: category=... message=...` line.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
