//! Mode dispatch: trains or evaluates per the resolved configuration and
//! writes traces, reports, and checkpoints into the output directory.

use anyhow::{Context, Result};

use dmrl_core::trainer;

use crate::checkpoint::{self, Artifact};
use crate::config::{Mode, RunConfig};
use crate::evaluate::{self, Scenario};
use crate::report;
use crate::selftest;

pub fn run(config: &RunConfig) -> Result<()> {
    match config.mode {
        Mode::Dmrl => {
            let (policy, model, trace) = trainer::train_dmrl(&config.hp, config.seed)?;
            config.ensure_out_dir()?;
            report::write_trace(&config.out_path("trace.csv"), &trace)?;
            checkpoint::save_checkpoint(&config.out_path("policy.json"), &Artifact::Policy(policy))?;
            checkpoint::save_checkpoint(
                &config.out_path("dynamics.json"),
                &Artifact::Dynamics(model),
            )?;
            report::print_trace_summary("dmrl", config.seed, &trace, config.hp.convergence_window);
            println!("wrote {}", config.out_path("trace.csv").display());
            Ok(())
        }
        Mode::Mf => {
            let (policy, trace) = trainer::train_mf_baseline(&config.hp, config.seed)?;
            config.ensure_out_dir()?;
            report::write_trace(&config.out_path("trace.csv"), &trace)?;
            checkpoint::save_checkpoint(&config.out_path("policy.json"), &Artifact::Policy(policy))?;
            report::print_trace_summary("mf", config.seed, &trace, config.hp.convergence_window);
            println!("wrote {}", config.out_path("trace.csv").display());
            Ok(())
        }
        Mode::Mb => {
            let (model, trace) = trainer::train_mb_baseline(&config.hp, config.seed)?;
            config.ensure_out_dir()?;
            report::write_trace(&config.out_path("trace.csv"), &trace)?;
            checkpoint::save_checkpoint(
                &config.out_path("dynamics.json"),
                &Artifact::Dynamics(model),
            )?;
            report::print_trace_summary("mb", config.seed, &trace, config.hp.convergence_window);
            println!("wrote {}", config.out_path("trace.csv").display());
            Ok(())
        }
        Mode::EvalStatic | Mode::EvalSine => {
            let scenario = if config.mode == Mode::EvalStatic {
                Scenario::Static
            } else {
                Scenario::Sine
            };
            let path = config
                .checkpoint
                .as_ref()
                .expect("eval modes always resolve with a checkpoint");
            let artifact = checkpoint::load_checkpoint(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?;
            checkpoint::expect_lander_artifact(&artifact)?;
            let report_data = evaluate::eval_adaptation(&artifact, scenario, &config.hp, config.seed)?;
            config.ensure_out_dir()?;
            report::write_eval(&config.out_path("eval.csv"), &report_data)?;
            report::print_eval_summary(&report_data);
            println!("wrote {}", config.out_path("eval.csv").display());
            Ok(())
        }
        Mode::Selftest => selftest::run_selftest(),
    }
}
