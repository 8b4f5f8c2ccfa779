use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use dmrl_cli::config::{Mode, RunConfig, UsageError};

/// Double meta-reinforcement learning on a windy planar lander: train the
/// two-phase learner or its baselines, evaluate test-time adaptation, or run
/// the built-in verification suites.
#[derive(Parser)]
#[command(name = "dmrl", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    mode: ModeArg,
    /// Flat JSON configuration file; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the whole run (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for traces, reports, and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint to evaluate (required by the eval modes).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Two-phase training: joint meta-training, then simulated-data training.
    Dmrl,
    /// Model-free meta-policy baseline.
    Mf,
    /// Model-based baseline acting through the random-shooting planner.
    Mb,
    /// Test-time adaptation under an unseen constant wind.
    EvalStatic,
    /// Test-time adaptation under sinusoidal wind.
    EvalSine,
    /// Gradient, planner, and determinism verification suites.
    Selftest,
}

impl From<ModeArg> for Mode {
    fn from(mode: ModeArg) -> Mode {
        match mode {
            ModeArg::Dmrl => Mode::Dmrl,
            ModeArg::Mf => Mode::Mf,
            ModeArg::Mb => Mode::Mb,
            ModeArg::EvalStatic => Mode::EvalStatic,
            ModeArg::EvalSine => Mode::EvalSine,
            ModeArg::Selftest => Mode::Selftest,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match RunConfig::resolve(
        cli.mode.into(),
        cli.config.as_deref(),
        cli.seed,
        cli.out,
        cli.checkpoint,
    ) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };
    match dmrl_cli::run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
