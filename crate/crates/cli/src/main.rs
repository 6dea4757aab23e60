//! `cfglab`: run guided-diffusion experiments on Gaussian mixtures and write
//! plot-ready CSV files.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when a
//! simulation produces non-finite values, 4 for I/O errors.

mod config;
mod error;
mod output;
mod presets;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(name = "cfglab", version, about = "Guided diffusion on Gaussian mixtures with exact scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or an explicit experiment and write its outputs.
    Run(RunArgs),
    /// Check a config against every invariant without simulating.
    Validate(RunArgs),
    /// List the available presets.
    ListPresets,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file (a run manifest works too).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name; see `list-presets`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory parallelism. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory. Defaults to `$CFGLAB_OUT/<name>`, else `cfglab-out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of trajectories per job.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Use 100 trajectories per job unless --n-traj is given.
    #[arg(long)]
    smoke: bool,
}

impl RunArgs {
    fn overrides(self) -> Overrides {
        Overrides {
            config: self.config,
            preset: self.preset,
            seed: self.seed,
            workers: self.workers,
            out: self.out,
            n_traj: self.n_traj,
            smoke: self.smoke,
        }
    }
}

fn list_presets() {
    let width = presets::PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
    for p in presets::PRESETS {
        println!("{:width$}  [{}] {}", p.name, p.figure, p.description);
    }
}

fn validate(args: RunArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::assemble(&args.overrides())?;
    let findings = config::validation_report(&cfg);
    if findings.is_empty() {
        println!("config is valid");
        return Ok(());
    }
    for f in &findings {
        println!("violation: {f}");
    }
    Err(CliError::Config(format!("{} violation(s)", findings.len())))
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::assemble(&args.overrides())?;
    let resolved = config::resolve(&cfg)?;
    for line in runner::run(&resolved)? {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => validate(a),
        Command::ListPresets => {
            list_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfglab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
