use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use damped_torus::error::LabError;
use damped_torus::harness::{run, Experiment, ExperimentConfig, ExperimentKind};

/// Numerical experiments for damped waves on the flat torus.
#[derive(Parser)]
#[command(name = "damped-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolvent norm sweep of the 2D stationary operator.
    Resolvent2d(Flags),
    /// Maximal 1D resolvent norm over lambda and regime gains.
    Resolvent1d(Flags),
    /// Averaged damping and its vanishing exponent.
    Averaging(Flags),
    /// Residual of the averaging conjugation.
    Normalform(Flags),
    /// Energy decay of trapped packets.
    Decay(Flags),
    /// Spectrum of the truncated generator.
    GeneratorSpectrum(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn config_for(kind: ExperimentKind, flags: &Flags) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(Experiment::default_for(kind)),
    };
    if cfg.experiment.kind() != kind {
        return Err(LabError::Config {
            field: "experiment.kind".into(),
            reason: format!(
                "config is `{}`, subcommand is `{}`",
                cfg.experiment.kind().name(),
                kind.name()
            ),
        });
    }
    if let Some(out) = &flags.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if flags.threads.is_some() {
        cfg.threads = flags.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Resolvent2d(f) => (ExperimentKind::Resolvent2d, f),
        Command::Resolvent1d(f) => (ExperimentKind::Resolvent1d, f),
        Command::Averaging(f) => (ExperimentKind::Averaging, f),
        Command::Normalform(f) => (ExperimentKind::Normalform, f),
        Command::Decay(f) => (ExperimentKind::Decay, f),
        Command::GeneratorSpectrum(f) => (ExperimentKind::GeneratorSpectrum, f),
    };
    let cfg = match config_for(kind, flags) {
        Ok(c) => c,
        Err(LabError::Config { field, reason }) => {
            eprintln!("config error: `{field}`: {reason}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            let s = &outcome.summary;
            let verdict = match s.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "not assessed",
            };
            println!("{}: {verdict}; output in {}", s.kind, cfg.out_dir.display());
            for f in &s.failures {
                eprintln!("failed point {}: {}", f.label, f.error);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(LabError::Config { field, reason }) => {
            eprintln!("config error: `{field}`: {reason}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
    }
}
