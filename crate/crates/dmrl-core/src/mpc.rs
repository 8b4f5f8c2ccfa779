//! Random-shooting model-predictive control.
//!
//! Candidate action sequences are drawn i.i.d. uniform, scored under a
//! transition model with the environment's known reward rules, and the first
//! action of the best-scoring sequence is executed. Ties break toward the
//! lowest candidate index so planning is deterministic given a seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{self, contact_terminal, shaping_reward, terminal_bonus, thrust_applies, Action, Obs, TaskSpec, TerminalKind};
use crate::error::{Error, Result};
use crate::rollout::{Controller, TransitionModel};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub n_candidate: usize,
    pub horizon: usize,
    pub gamma: f64,
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidate == 0 {
            return Err(Error::contract("planner needs at least one candidate"));
        }
        if self.horizon == 0 {
            return Err(Error::contract("planning horizon must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::contract("gamma must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A scored candidate sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub sequence: Vec<Action>,
    pub predicted_return: f64,
}

/// Discounted predicted return of executing `seq` open-loop from `s0` under
/// the model, with the environment's reward applied to predicted states.
/// Scoring stops at a predicted terminal; later steps contribute nothing.
pub fn score_sequence<M>(model: &M, s0: &Obs, seq: &[Action], gamma: f64) -> f64
where
    M: TransitionModel + Clone,
{
    let mut m = model.clone();
    m.begin_episode(s0);
    let mut obs = *s0;
    let mut total = 0.0;
    let mut disc = 1.0;
    for &action in seq {
        let applied = thrust_applies(&obs, action);
        let shaping = shaping_reward(&obs, applied);
        let next = m.predict(&obs, action);
        let kind = if next.iter().all(|v| v.is_finite()) {
            contact_terminal(&next)
        } else {
            TerminalKind::Timeout
        };
        total += disc * (shaping + terminal_bonus(kind));
        disc *= gamma;
        obs = next;
        if kind != TerminalKind::None {
            break;
        }
    }
    total
}

/// Draws `n_candidate` sequences over the given action alphabet, scores them
/// all, and returns the best with its score. The draw order is fixed, so a
/// longer run with the same seed extends a shorter one's candidate list.
pub fn plan_over<M>(
    model: &M,
    s0: &Obs,
    cfg: &PlanConfig,
    actions: &[Action],
    rng: &mut ChaCha8Rng,
) -> Result<CandidateScore>
where
    M: TransitionModel + Clone + Sync,
{
    cfg.validate()?;
    if actions.is_empty() {
        return Err(Error::contract("planner needs a non-empty action alphabet"));
    }
    let candidates: Vec<Vec<Action>> = (0..cfg.n_candidate)
        .map(|_| {
            (0..cfg.horizon)
                .map(|_| actions[rng.gen_range(0..actions.len())])
                .collect()
        })
        .collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|seq| score_sequence(model, s0, seq, cfg.gamma))
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        // NaN never wins; strict comparison keeps the lowest index on ties.
        if s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    Ok(CandidateScore {
        sequence: candidates.into_iter().nth(best).expect("index in range"),
        predicted_return: scores[best],
    })
}

/// Plans over the full action set and returns the first action of the best
/// candidate sequence.
pub fn plan<M>(model: &M, s0: &Obs, cfg: &PlanConfig, rng: &mut ChaCha8Rng) -> Result<Action>
where
    M: TransitionModel + Clone + Sync,
{
    Ok(plan_over(model, s0, cfg, &Action::ALL, rng)?.sequence[0])
}

/// Controller that replans from scratch at every step.
pub struct MpcController<'a, M> {
    pub model: &'a M,
    pub cfg: &'a PlanConfig,
}

impl<M> Controller for MpcController<'_, M>
where
    M: TransitionModel + Clone + Sync,
{
    fn act(&mut self, obs: &Obs, rng: &mut ChaCha8Rng) -> Action {
        plan(self.model, obs, self.cfg, rng).expect("plan config validated at rollout start")
    }
}

/// Environment rollout where every action comes from the planner.
pub fn mb_rollout<M>(
    task: &TaskSpec,
    model: &M,
    cfg: &PlanConfig,
    rng: &mut ChaCha8Rng,
    max_len: usize,
    task_id: u64,
) -> Result<Trajectory>
where
    M: TransitionModel + Clone + Sync,
{
    cfg.validate()?;
    let mut controller = MpcController { model, cfg };
    Ok(env::rollout(task, &mut controller, rng, max_len, task_id))
}
