//! `ews`: law lookup, sweeps, fits, simulation and comparison plots.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation error, 4 numerical failure.

mod commands;
mod specs;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AppendixArgs, CompareArgs, FitArgs, LawsCommand, SimulateArgs, SpectralArgs, SweepArgs};

/// Malformed command-line input.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A check whose tolerance was not met.
#[derive(Debug)]
pub struct ToleranceNotMet(pub String);

impl fmt::Display for ToleranceNotMet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ToleranceNotMet {}

#[derive(Parser, Debug)]
#[command(name = "ews", version, about = "Early-warning-sign scaling laws for linear SPDEs")]
struct Cli {
    /// Seed for every random stream; recorded in manifests.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and replicas.
    #[arg(long, global = true, env = "EWS_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// JSON config for the subcommand, or a manifest written by an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Look up a scaling law in the catalog.
    #[command(subcommand)]
    Laws(LawsCommand),
    /// Sweep the variance over p and write `p,value,stderr,source`.
    Sweep(SweepArgs),
    /// Fit `(s, k)` to a sweep CSV and classify it.
    Fit(FitArgs),
    /// Simulate the SPDE and estimate the stationary variance.
    Simulate(SimulateArgs),
    /// Overlay quadrature, simulation and the catalog law in one plot.
    Compare(CompareArgs),
    /// Variance of a Fourier-multiplier operator.
    Spectral(SpectralArgs),
    /// Check the log-power integrals against their closed form and limits.
    AppendixCheck(AppendixArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    if err.downcast_ref::<ToleranceNotMet>().is_some() {
        return 4;
    }
    match err.downcast_ref::<ews_core::Error>() {
        Some(ews_core::Error::NotConverged { .. }) | Some(ews_core::Error::Fit(_)) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let ctx = commands::Context {
        out: cli.out,
        seed: cli.seed,
        config: cli.config,
    };
    let result = match cli.command {
        Command::Laws(c) => commands::laws(c),
        Command::Sweep(a) => commands::sweep(a, &ctx),
        Command::Fit(a) => commands::fit(a, &ctx),
        Command::Simulate(a) => commands::simulate(a, &ctx),
        Command::Compare(a) => commands::compare(a, &ctx),
        Command::Spectral(a) => commands::spectral(a, &ctx),
        Command::AppendixCheck(a) => commands::appendix_check(a, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
