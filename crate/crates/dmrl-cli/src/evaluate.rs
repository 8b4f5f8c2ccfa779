//! Test-time adaptation: fix an unseen task, alternate between collecting a
//! few environment rollouts with the current parameters and applying one
//! adaptation step, and record the return at every step. Aggregated over a
//! fixed number of Monte-Carlo trials.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dmrl_core::dynamics;
use dmrl_core::env::{self, TaskSpec, WIND_LIMIT};
use dmrl_core::trajectory::{Trajectory, Transition};
use dmrl_core::{Hyperparams, ReturnStats};

use crate::checkpoint::Artifact;
use crate::report::converge_index;

/// Test-time wind regimes. `Static` draws an unseen constant wind from the
/// training range per trial; `Sine` uses a sinusoidal wind of amplitude 2 at
/// 0.01 Hz on both axes, outside anything seen in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Static,
    Sine,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Static => "static",
            Scenario::Sine => "sine",
        }
    }

    pub fn sample_task(self, rng: &mut ChaCha8Rng) -> TaskSpec {
        match self {
            Scenario::Static => TaskSpec::Constant {
                wx: rng.gen_range(-WIND_LIMIT..=WIND_LIMIT),
                wy: rng.gen_range(-WIND_LIMIT..=WIND_LIMIT),
            },
            Scenario::Sine => TaskSpec::Sinusoidal {
                ax: 2.0,
                ay: 2.0,
                freq_x: 0.01,
                freq_y: 0.01,
            },
        }
    }
}

/// Returns per trial and adaptation index, with per-index statistics.
/// Index 0 is the zero-shot return of the unadapted parameters.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub scenario: Scenario,
    /// `returns[trial][index]`: mean return of that step's rollouts.
    pub returns: Vec<Vec<f64>>,
    pub mean_per_index: Vec<f64>,
    pub std_per_index: Vec<f64>,
    pub batches_to_converge: Option<usize>,
    /// Total environment rollouts consumed across all trials.
    pub env_rollouts: usize,
}

const EVAL_CONVERGE_WINDOW: usize = 5;
const EVAL_CONVERGE_REL_TOL: f64 = 0.1;
const EVAL_CONVERGE_ABS_FLOOR: f64 = 0.5;

/// Runs `hp.mc_trials` independent trials of test-time adaptation on the
/// scenario's task. Each trial collects `hp.eval_rollouts_per_step` rollouts
/// per adaptation index, records their mean discounted return, and applies
/// one adaptation step on exactly those rollouts.
pub fn eval_adaptation(
    artifact: &Artifact,
    scenario: Scenario,
    hp: &Hyperparams,
    seed: u64,
) -> Result<EvalReport> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let trial_seeds: Vec<u64> = (0..hp.mc_trials).map(|_| master.gen()).collect();

    let per_trial: Vec<Result<(Vec<f64>, usize)>> = trial_seeds
        .par_iter()
        .map(|&trial_seed| run_trial(artifact, scenario, hp, trial_seed))
        .collect();
    let mut returns = Vec::with_capacity(per_trial.len());
    let mut env_rollouts = 0;
    for outcome in per_trial {
        let (trial_returns, rollouts) = outcome?;
        env_rollouts += rollouts;
        returns.push(trial_returns);
    }

    let n_index = hp.eval_adaptation_steps + 1;
    let mut mean_per_index = Vec::with_capacity(n_index);
    let mut std_per_index = Vec::with_capacity(n_index);
    for idx in 0..n_index {
        let column: Vec<f64> = returns.iter().map(|t| t[idx]).collect();
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        let var =
            column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / column.len() as f64;
        mean_per_index.push(mean);
        std_per_index.push(var.sqrt());
    }
    let batches_to_converge = converge_index(
        &mean_per_index,
        EVAL_CONVERGE_WINDOW,
        EVAL_CONVERGE_REL_TOL,
        EVAL_CONVERGE_ABS_FLOOR,
    );

    Ok(EvalReport {
        scenario,
        returns,
        mean_per_index,
        std_per_index,
        batches_to_converge,
        env_rollouts,
    })
}

fn run_trial(
    artifact: &Artifact,
    scenario: Scenario,
    hp: &Hyperparams,
    trial_seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let task = scenario.sample_task(&mut rng);
    let mut returns = Vec::with_capacity(hp.eval_adaptation_steps + 1);
    let mut rollouts_used = 0;

    match artifact {
        Artifact::Policy(initial) => {
            let mut policy = initial.clone();
            for step in 0..=hp.eval_adaptation_steps {
                let batch: Vec<Trajectory> = (0..hp.eval_rollouts_per_step)
                    .map(|_| {
                        let mut controller = &policy;
                        env::rollout(&task, &mut controller, &mut rng, hp.max_rollout_len, 0)
                    })
                    .collect();
                rollouts_used += batch.len();
                returns.push(ReturnStats::from_trajectories(&batch, hp.gamma)?.mean);
                if step < hp.eval_adaptation_steps {
                    policy = policy.adapt(&batch, hp.beta, hp.gamma)?;
                }
            }
        }
        Artifact::Dynamics(initial) => {
            let mut model = initial.clone();
            let plan_cfg = hp.plan_config();
            for step in 0..=hp.eval_adaptation_steps {
                let batch: Vec<Trajectory> = (0..hp.eval_rollouts_per_step)
                    .map(|_| {
                        let model_ref = &model;
                        dmrl_core::mpc::mb_rollout(
                            &task,
                            &model_ref,
                            &plan_cfg,
                            &mut rng,
                            hp.max_rollout_len,
                            0,
                        )
                    })
                    .collect::<dmrl_core::Result<_>>()?;
                rollouts_used += batch.len();
                returns.push(ReturnStats::from_trajectories(&batch, hp.gamma)?.mean);
                if step < hp.eval_adaptation_steps {
                    let transitions: Vec<Transition> =
                        batch.iter().flat_map(|t| t.transitions()).collect();
                    model = dynamics::adapt(&model, &transitions, hp.alpha, 1)?;
                }
            }
        }
    }
    Ok((returns, rollouts_used))
}

/// One-sided sign test: probability of at least `positives` successes among
/// `positives + negatives` fair coin flips. Ties are excluded by the caller.
pub fn sign_test_p(positives: usize, negatives: usize) -> f64 {
    let n = positives + negatives;
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in positives..=n {
        total += binomial(n, k);
    }
    total / 2f64.powi(n as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut value = 1.0;
    for i in 0..k {
        value = value * (n - i) as f64 / (i + 1) as f64;
    }
    value
}
