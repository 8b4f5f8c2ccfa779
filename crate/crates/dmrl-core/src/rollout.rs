//! The rollout driver shared by the true environment and learned models.
//!
//! Both kinds of rollout differ only in where the next observation comes
//! from, so a single loop produces them. This is what makes an exact
//! simulator injected as a "model" reproduce environment rollouts
//! bit-identically under shared seeds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{
    classify_step, shaping_reward, terminal_bonus, thrust_applies, Action, Obs, TerminalKind,
    ACTION_COUNT,
};
use crate::trajectory::{Provenance, Step, Trajectory};

/// Anything that can produce the next observation from the current one.
pub trait TransitionModel {
    /// Called once before a rollout starts with the episode's first
    /// observation. Stateful models rebuild their internal state here.
    fn begin_episode(&mut self, _init_obs: &Obs) {}

    fn predict(&mut self, obs: &Obs, action: Action) -> Obs;
}

/// Anything that picks actions during a rollout.
pub trait Controller {
    fn act(&mut self, obs: &Obs, rng: &mut ChaCha8Rng) -> Action;

    /// Hash of the parameters that drive this controller, used to tag
    /// trajectories for on-policy checks. Non-parametric controllers
    /// report 0.
    fn params_hash(&self) -> u64 {
        0
    }
}

/// Always plays the same action. Test and probe helper.
pub struct FixedActionController(pub Action);

impl Controller for FixedActionController {
    fn act(&mut self, _obs: &Obs, _rng: &mut ChaCha8Rng) -> Action {
        self.0
    }
}

/// Uniform random actions.
pub struct UniformController;

impl Controller for UniformController {
    fn act(&mut self, _obs: &Obs, rng: &mut ChaCha8Rng) -> Action {
        Action::from_code(rng.gen_range(0..ACTION_COUNT)).expect("code in range")
    }
}

/// Predicted observations beyond this magnitude end the rollout: a learned
/// model has left any region where the reward is meaningful.
const DIVERGENCE_BOUND: f64 = 1e9;

fn sane(obs: &Obs) -> bool {
    obs.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND)
}

/// Rolls a trajectory of at most `max_len` steps from `init_obs`, picking
/// actions with `controller` and advancing with `model`. Rewards and
/// terminal classification use the environment's observation-space rules;
/// the reward of a step combines shaping at the current observation with
/// the bonus of the resulting one.
pub fn drive_rollout<M: TransitionModel + ?Sized, C: Controller + ?Sized>(
    model: &mut M,
    controller: &mut C,
    rng: &mut ChaCha8Rng,
    max_len: usize,
    init_obs: Obs,
    task_id: u64,
    provenance: Provenance,
) -> Trajectory {
    assert!(max_len >= 1, "rollouts must allow at least one step");
    model.begin_episode(&init_obs);
    let mut obs = init_obs;
    let mut steps = Vec::new();
    let mut terminal = TerminalKind::None;
    for t in 0..max_len {
        let action = controller.act(&obs, rng);
        let applied = thrust_applies(&obs, action);
        let shaping = shaping_reward(&obs, applied);
        let next = model.predict(&obs, action);
        let kind = if sane(&next) {
            classify_step(&next, t + 1, max_len)
        } else {
            // Diverged model prediction: truncate without a bonus.
            TerminalKind::Timeout
        };
        steps.push(Step {
            obs,
            action,
            reward: shaping + terminal_bonus(kind),
        });
        obs = next;
        if kind != TerminalKind::None {
            terminal = kind;
            break;
        }
    }
    let policy_hash = controller.params_hash();
    Trajectory {
        task_id,
        steps,
        final_obs: obs,
        terminal,
        provenance,
        policy_hash,
    }
}
