//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use boselab::harness::{emit, exit_code, run, Experiment, ExperimentConfig, Report};
use boselab::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boselab", version, about = "Mean-field, Bogoliubov and Gross-Pitaevskii experiments on a lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace-norm convergence of reduced densities to the Hartree projection
    Converge(Common),
    /// Number of fluctuations around the Hartree coherent state
    Fluct(Common),
    /// Law of the centered one-body sum against its Gaussian limit
    Clt(Common),
    /// Scattering constants and the narrow-kernel Gross-Pitaevskii limit
    Gp(Common),
    /// Gross-Pitaevskii ground states
    Minimize(Common),
    /// Zero-energy scattering only
    Scatter(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled runs
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config value, `key=value`; may be repeated
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::Converge(c) => (Experiment::Converge, c),
            Command::Fluct(c) => (Experiment::Fluct, c),
            Command::Clt(c) => (Experiment::Clt, c),
            Command::Gp(c) => (Experiment::Gp, c),
            Command::Minimize(c) => (Experiment::Minimize, c),
            Command::Scatter(c) => (Experiment::Scatter, c),
        }
    }
}

fn configure(experiment: Experiment, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(experiment, path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

fn print_report(report: &Report) {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for s in &report.skipped {
        println!("SKIP N = {}: {}", s.n, s.reason);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    let outcome = configure(experiment, args).and_then(|cfg| {
        let report = run(&cfg)?;
        let files = emit(&report, &cfg.out)?;
        println!("wrote {} and {}", files.csv.display(), files.summary.display());
        Ok(report)
    });
    match &outcome {
        Ok(report) => print_report(report),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
