//! Run configuration: a flat JSON document merged with command-line
//! overrides. Unknown keys are rejected outright.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use dmrl_core::Hyperparams;

/// Marker for configuration and usage mistakes; the binary exits with
/// status 2 when it surfaces.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dmrl,
    Mf,
    Mb,
    EvalStatic,
    EvalSine,
    Selftest,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Dmrl => "dmrl",
            Mode::Mf => "mf",
            Mode::Mb => "mb",
            Mode::EvalStatic => "eval-static",
            Mode::EvalSine => "eval-sine",
            Mode::Selftest => "selftest",
        }
    }

    pub fn is_eval(self) -> bool {
        matches!(self, Mode::EvalStatic | Mode::EvalSine)
    }
}

/// The on-disk configuration document. Every field is optional; anything
/// absent falls back to the defaults in [`Hyperparams`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub meta_batch_size: Option<usize>,
    pub n_candidate: Option<usize>,
    pub mpc_horizon: Option<usize>,
    pub max_rollout_len: Option<usize>,
    pub n_iterations: Option<usize>,
    pub mc_trials: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub alpha_meta: Option<f64>,
    pub beta_meta: Option<f64>,
    pub gamma: Option<f64>,
    pub rollouts_per_task: Option<usize>,
    pub convergence_window: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub train_fraction: Option<f64>,
    pub switch_iteration: Option<usize>,
    pub eval_adaptation_steps: Option<usize>,
    pub eval_rollouts_per_step: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage_error(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| usage_error(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply_to(&self, hp: &mut Hyperparams) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { hp.$field = v; })*
            };
        }
        take!(
            meta_batch_size,
            n_candidate,
            mpc_horizon,
            max_rollout_len,
            n_iterations,
            mc_trials,
            alpha,
            beta,
            alpha_meta,
            beta_meta,
            gamma,
            rollouts_per_task,
            convergence_window,
            convergence_tol,
            train_fraction,
            eval_adaptation_steps,
            eval_rollouts_per_step
        );
        if self.switch_iteration.is_some() {
            hp.switch_iteration = self.switch_iteration;
        }
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub hp: Hyperparams,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    /// Merges defaults, the optional config file, and command-line
    /// overrides (which win).
    pub fn resolve(
        mode: Mode,
        config_path: Option<&Path>,
        seed: Option<u64>,
        out: Option<PathBuf>,
        checkpoint: Option<PathBuf>,
    ) -> Result<RunConfig> {
        let file = match config_path {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let mut hp = Hyperparams::default();
        file.apply_to(&mut hp);
        hp.validate()
            .map_err(|e| usage_error(format!("invalid configuration: {e}")))?;

        let config = RunConfig {
            mode,
            hp,
            seed: seed.or(file.seed).unwrap_or(0),
            out_dir: out.or(file.out).unwrap_or_else(|| PathBuf::from("runs")),
            checkpoint: checkpoint.or(file.checkpoint),
        };
        if config.mode.is_eval() && config.checkpoint.is_none() {
            return Err(usage_error(format!(
                "mode {} requires a checkpoint (--checkpoint or the config's \"checkpoint\" key)",
                config.mode.label()
            )));
        }
        Ok(config)
    }

    pub fn out_path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("cannot create output directory {}", self.out_dir.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ConfigFile>(r#"{"seed": 1, "typo_key": 2}"#).unwrap_err();
        assert!(err.to_string().contains("typo_key"));
    }

    #[test]
    fn overrides_cascade_from_defaults_to_file_to_flags() {
        let file: ConfigFile =
            serde_json::from_str(r#"{"seed": 5, "n_iterations": 12, "gamma": 0.9}"#).unwrap();
        let mut hp = Hyperparams::default();
        file.apply_to(&mut hp);
        assert_eq!(hp.n_iterations, 12);
        assert_eq!(hp.gamma, 0.9);
        assert_eq!(hp.meta_batch_size, 10);
    }

    #[test]
    fn eval_modes_demand_a_checkpoint() {
        let err = RunConfig::resolve(Mode::EvalStatic, None, Some(1), None, None).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
        let ok = RunConfig::resolve(Mode::Dmrl, None, Some(1), None, None).unwrap();
        assert_eq!(ok.seed, 1);
        assert_eq!(ok.out_dir, PathBuf::from("runs"));
    }
}
