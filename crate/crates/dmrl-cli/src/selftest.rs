//! Built-in verification suites: analytic gradients against central finite
//! differences for both training losses, the sampling planner against
//! exhaustive search, and whole-run determinism. The `selftest` mode runs
//! quick versions; the acceptance tests run them at full size.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dmrl_core::dynamics::{self, DynamicsModel, Normalizer, MODEL_INPUT_DIM};
use dmrl_core::env::{Action, TerminalKind, ACTION_COUNT, OBS_DIM};
use dmrl_core::mpc::{self, PlanConfig};
use dmrl_core::nn::{Head, MlpSpec, ParamVector};
use dmrl_core::policy::{self, Policy, ReturnStats};
use dmrl_core::trainer::{self, Hyperparams};
use dmrl_core::trajectory::{Provenance, Step, Trajectory, Transition};

use crate::report::{strip_wall_ms, trace_csv};

/// Relative error with a small-magnitude floor, so finite-difference noise
/// on near-zero gradients does not register as disagreement.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

fn random_obs(rng: &mut ChaCha8Rng) -> [f64; OBS_DIM] {
    [
        rng.gen_range(-1.5..1.5),
        rng.gen_range(0.0..10.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(0.0..1.0),
    ]
}

/// Jittered initialization: no ReLU unit sits exactly on its kink, where
/// central differences and the subgradient convention legitimately differ.
fn jittered_params(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> ParamVector {
    let init = spec.init_params(rng);
    let values = init.values().iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
    ParamVector::from_values(spec.layout(), values).expect("layout preserved")
}

const FD_STEP: f64 = 1e-5;

/// Checks the policy-loss gradient on `cases` random small networks: the
/// REINFORCE estimator must equal the finite-difference gradient of the
/// surrogate with frozen advantages. Returns the worst relative error seen.
pub fn policy_gradient_oracle(cases: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = 0.97;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let hidden = vec![rng.gen_range(2..7)];
        let output_dim = rng.gen_range(2..=ACTION_COUNT);
        let spec = MlpSpec::new(OBS_DIM, hidden, output_dim, Head::Softmax)
            .map_err(anyhow::Error::new)?;
        let params = jittered_params(&spec, &mut rng);
        let policy = Policy::from_parts(spec.clone(), params).map_err(anyhow::Error::new)?;

        let mut trajectories = Vec::new();
        for _ in 0..2 {
            let steps: Vec<Step> = (0..3)
                .map(|_| Step {
                    obs: random_obs(&mut rng),
                    action: Action::from_code(rng.gen_range(0..output_dim)).expect("in range"),
                    reward: rng.gen_range(-1.0..1.0),
                })
                .collect();
            trajectories.push(Trajectory {
                task_id: 0,
                steps,
                final_obs: [0.0; OBS_DIM],
                terminal: TerminalKind::Timeout,
                provenance: Provenance::Env,
                policy_hash: policy.params_hash(),
            });
        }

        let baseline = ReturnStats::from_trajectories(&trajectories, gamma)
            .map_err(anyhow::Error::new)?
            .mean;
        let n = trajectories.len() as f64;
        let surrogate = |params: &ParamVector| -> f64 {
            let p = Policy::from_parts(spec.clone(), params.clone()).expect("same layout");
            let mut total = 0.0;
            for traj in &trajectories {
                for (step, g_t) in traj.steps.iter().zip(traj.rewards_to_go(gamma)) {
                    let probs = p.action_distribution(&step.obs).expect("dims match");
                    total += -(g_t - baseline) / n * probs[step.action.code()].ln();
                }
            }
            total
        };

        let analytic =
            policy::policy_gradient(&policy, &trajectories, gamma).map_err(anyhow::Error::new)?;
        for i in 0..policy.params().len() {
            let layout = policy.params().layout().to_vec();
            let mut plus = policy.params().values().to_vec();
            plus[i] += FD_STEP;
            let mut minus = policy.params().values().to_vec();
            minus[i] -= FD_STEP;
            let fp = surrogate(&ParamVector::from_values(layout.clone(), plus).expect("len ok"));
            let fm = surrogate(&ParamVector::from_values(layout, minus).expect("len ok"));
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.values()[i], numeric));
        }
    }
    Ok(worst)
}

/// Checks the dynamics-loss gradient on `cases` random small networks
/// against central finite differences. Returns the worst relative error.
pub fn model_gradient_oracle(cases: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let hidden = vec![rng.gen_range(3..8), rng.gen_range(2..6)];
        let spec = MlpSpec::new(MODEL_INPUT_DIM, hidden, OBS_DIM, Head::Linear)
            .map_err(anyhow::Error::new)?;
        let params = jittered_params(&spec, &mut rng);
        let norm = Normalizer {
            mean: (0..MODEL_INPUT_DIM).map(|_| rng.gen_range(-0.2..0.2)).collect(),
            std: (0..MODEL_INPUT_DIM).map(|_| rng.gen_range(0.5..1.5)).collect(),
        };
        let model = DynamicsModel::from_parts(spec.clone(), params, norm.clone())
            .map_err(anyhow::Error::new)?;

        let batch: Vec<Transition> = (0..4)
            .map(|_| {
                let obs = random_obs(&mut rng);
                let mut next = obs;
                for v in &mut next {
                    *v += rng.gen_range(-0.3..0.3);
                }
                Transition {
                    obs,
                    action: Action::from_code(rng.gen_range(0..ACTION_COUNT)).expect("in range"),
                    next_obs: next,
                }
            })
            .collect();

        let analytic =
            dynamics::model_loss_gradient(&model, &batch).map_err(anyhow::Error::new)?;
        for i in 0..model.params().len() {
            let layout = model.params().layout().to_vec();
            let mut plus = model.params().values().to_vec();
            plus[i] += FD_STEP;
            let mut minus = model.params().values().to_vec();
            minus[i] -= FD_STEP;
            let mp = DynamicsModel::from_parts(
                spec.clone(),
                ParamVector::from_values(layout.clone(), plus).expect("len ok"),
                norm.clone(),
            )
            .map_err(anyhow::Error::new)?;
            let mm = DynamicsModel::from_parts(
                spec.clone(),
                ParamVector::from_values(layout, minus).expect("len ok"),
                norm.clone(),
            )
            .map_err(anyhow::Error::new)?;
            let numeric = (dynamics::model_loss(&mp, &batch).map_err(anyhow::Error::new)?
                - dynamics::model_loss(&mm, &batch).map_err(anyhow::Error::new)?)
                / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.values()[i], numeric));
        }
    }
    Ok(worst)
}

/// Planner check: with a two-action alphabet and horizons up to three, the
/// sampled planner given full candidate coverage must agree exactly with
/// exhaustive enumeration.
pub fn mpc_oracle(cases: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let model = DynamicsModel::with_hidden(
            vec![rng.gen_range(4..12), rng.gen_range(3..8)],
            &mut rng,
        );
        let s0 = random_obs(&mut rng);
        let horizon = rng.gen_range(1..=3usize);
        let first = rng.gen_range(0..ACTION_COUNT);
        let second = (first + rng.gen_range(1..ACTION_COUNT)) % ACTION_COUNT;
        let actions = [
            Action::from_code(first).expect("in range"),
            Action::from_code(second).expect("in range"),
        ];
        let cfg = PlanConfig {
            n_candidate: 128,
            horizon,
            gamma: 0.99,
        };

        // Replay the planner's draws to confirm every sequence was sampled.
        let mut preview = rng.clone();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..cfg.n_candidate {
            let seq: Vec<usize> = (0..horizon)
                .map(|_| actions[preview.gen_range(0..actions.len())].code())
                .collect();
            seen.insert(seq);
        }
        if seen.len() != 2usize.pow(horizon as u32) {
            bail!("case {case}: candidate draws did not cover the sequence space");
        }

        let model_ref = &model;
        let planned = mpc::plan_over(&model_ref, &s0, &cfg, &actions, &mut rng)
            .map_err(anyhow::Error::new)?;

        let mut best_score = f64::NEG_INFINITY;
        let mut best_first: Vec<Action> = Vec::new();
        let mut stack = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == horizon {
                let score = mpc::score_sequence(&model_ref, &s0, &prefix, cfg.gamma);
                if score > best_score {
                    best_score = score;
                    best_first = vec![prefix[0]];
                } else if score == best_score && !best_first.contains(&prefix[0]) {
                    // Distinct sequences can score exactly equal (two thrust
                    // actions over a short horizon, say); any of their first
                    // actions is a correct plan.
                    best_first.push(prefix[0]);
                }
                continue;
            }
            for &a in actions.iter().rev() {
                let mut next = prefix.clone();
                next.push(a);
                stack.push(next);
            }
        }

        if planned.predicted_return != best_score {
            bail!(
                "case {case}: planner score {} differs from exhaustive best {best_score}",
                planned.predicted_return
            );
        }
        if !best_first.contains(&planned.sequence[0]) {
            bail!(
                "case {case}: planner first action {:?} is not among the exhaustive argmax {:?}",
                planned.sequence[0],
                best_first
            );
        }
    }
    Ok(())
}

/// Two full training runs under one seed must emit byte-identical traces
/// once the wall-clock column is dropped.
pub fn determinism_check(hp: &Hyperparams, seed: u64) -> Result<()> {
    let (_, _, trace_a) = trainer::train_dmrl(hp, seed).map_err(anyhow::Error::new)?;
    let (_, _, trace_b) = trainer::train_dmrl(hp, seed).map_err(anyhow::Error::new)?;
    let a = strip_wall_ms(&trace_csv(&trace_a));
    let b = strip_wall_ms(&trace_csv(&trace_b));
    if a != b {
        bail!("traces of identical seeds differ");
    }
    Ok(())
}

/// The `selftest` mode: quick versions of the three suites, one line each.
pub fn run_selftest() -> Result<()> {
    let mut failures = 0;

    let policy_err = policy_gradient_oracle(10, 2024)?;
    report("gradient oracle (policy loss)", policy_err <= 1e-4, &format!("max rel err {policy_err:.2e}"), &mut failures);

    let model_err = model_gradient_oracle(10, 2025)?;
    report("gradient oracle (dynamics loss)", model_err <= 1e-4, &format!("max rel err {model_err:.2e}"), &mut failures);

    let mpc = mpc_oracle(10, 2026);
    report("planner vs exhaustive search", mpc.is_ok(), &match &mpc {
        Ok(()) => "10 cases exact".to_string(),
        Err(e) => e.to_string(),
    }, &mut failures);

    let hp = Hyperparams {
        meta_batch_size: 2,
        rollouts_per_task: 2,
        max_rollout_len: 12,
        n_iterations: 4,
        switch_iteration: Some(2),
        n_candidate: 8,
        mpc_horizon: 3,
        ..Hyperparams::default()
    };
    let det = determinism_check(&hp, 7);
    report("whole-run determinism", det.is_ok(), &match &det {
        Ok(()) => "traces identical".to_string(),
        Err(e) => e.to_string(),
    }, &mut failures);

    if failures > 0 {
        bail!("{failures} selftest suite(s) failed");
    }
    Ok(())
}

fn report(name: &str, ok: bool, detail: &str, failures: &mut usize) {
    if ok {
        println!("selftest {name}: PASS ({detail})");
    } else {
        println!("selftest {name}: FAIL ({detail})");
        *failures += 1;
    }
}
