//! Training orchestration.
//!
//! The double training scheme runs two phases. In the first, a policy and a
//! dynamics model are meta-trained jointly on real environment rollouts while
//! every trajectory is banked in a buffer. Once the model's post-adaptation
//! validation loss flattens (or at a fixed iteration, if configured), the
//! environment is never touched again: the second phase meta-trains the
//! policy purely on rollouts generated by the task-adapted model over
//! replayed buffer tasks. The two baselines reuse the same machinery: the
//! model-free variant is the first phase without a model and without a
//! switch, and the model-based variant meta-trains only the model on data
//! collected by its own planner.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::buffer::{DataBuffer, SplitRule, TaskData};
use crate::dynamics::{self, DynamicsModel, Normalizer, TransitionBatch};
use crate::env::{self, Obs, SimulatorModel, TaskSpec};
use crate::error::{Error, Result};
use crate::mpc::{self, PlanConfig};
use crate::policy::{Policy, ReturnStats};
use crate::rollout::{drive_rollout, TransitionModel};
use crate::trajectory::{Provenance, Trajectory, Transition};

/// Inner-loop budget when adapting the dynamics model to a replayed task:
/// stop after this many gradient steps or once the support loss drops
/// below [`PHASE2_ADAPT_TOL`], whichever comes first.
pub const PHASE2_ADAPT_STEPS: usize = 50;
pub const PHASE2_ADAPT_TOL: f64 = 1e-3;

/// All knobs of a training run. Defaults follow the reference configuration:
/// meta-batches of 10 tasks, 1000 planner candidates over a horizon of 10,
/// rollouts capped at 150 steps, 200 iterations, 10 Monte-Carlo evaluation
/// trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub meta_batch_size: usize,
    pub n_candidate: usize,
    pub mpc_horizon: usize,
    pub max_rollout_len: usize,
    pub n_iterations: usize,
    pub mc_trials: usize,
    /// Dynamics-model inner (adaptation) learning rate.
    pub alpha: f64,
    /// Policy inner (adaptation) learning rate.
    pub beta: f64,
    /// Dynamics-model meta learning rate.
    pub alpha_meta: f64,
    /// Policy meta learning rate.
    pub beta_meta: f64,
    pub gamma: f64,
    pub rollouts_per_task: usize,
    /// Trailing window length for the model-convergence rule.
    pub convergence_window: usize,
    /// Relative range threshold for the model-convergence rule.
    pub convergence_tol: f64,
    pub train_fraction: f64,
    /// When set, switch to simulated training at this iteration instead of
    /// waiting for the convergence rule.
    pub switch_iteration: Option<usize>,
    /// Number of adaptation steps granted at test time.
    pub eval_adaptation_steps: usize,
    /// Environment rollouts collected per test-time adaptation step.
    pub eval_rollouts_per_step: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            meta_batch_size: 10,
            n_candidate: 1000,
            mpc_horizon: 10,
            max_rollout_len: 150,
            n_iterations: 200,
            mc_trials: 10,
            alpha: 1e-3,
            beta: 1e-3,
            alpha_meta: 1e-3,
            beta_meta: 1e-3,
            gamma: 0.99,
            rollouts_per_task: 2,
            convergence_window: 10,
            convergence_tol: 0.05,
            train_fraction: 0.5,
            switch_iteration: None,
            eval_adaptation_steps: 25,
            eval_rollouts_per_step: 2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("meta_batch_size", self.meta_batch_size),
            ("n_candidate", self.n_candidate),
            ("mpc_horizon", self.mpc_horizon),
            ("max_rollout_len", self.max_rollout_len),
            ("n_iterations", self.n_iterations),
            ("mc_trials", self.mc_trials),
            ("eval_rollouts_per_step", self.eval_rollouts_per_step),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::contract(format!("{name} must be >= 1")));
            }
        }
        if self.rollouts_per_task < 2 {
            return Err(Error::contract(
                "rollouts_per_task must be >= 2 so every task batch can be split",
            ));
        }
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("alpha_meta", self.alpha_meta),
            ("beta_meta", self.beta_meta),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::contract(format!("{name} must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::contract("gamma must lie in [0, 1]"));
        }
        if self.convergence_window < 2 {
            return Err(Error::contract("convergence_window must be >= 2"));
        }
        if !self.convergence_tol.is_finite() || self.convergence_tol < 0.0 {
            return Err(Error::contract("convergence_tol must be >= 0"));
        }
        SplitRule::new(self.train_fraction)?;
        if self.switch_iteration == Some(0) {
            return Err(Error::contract(
                "switch_iteration must be >= 1 so the buffer is non-empty",
            ));
        }
        Ok(())
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            n_candidate: self.n_candidate,
            horizon: self.mpc_horizon,
            gamma: self.gamma,
        }
    }
}

/// Which loop produced a metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    One,
    Two,
    ModelFree,
    ModelBased,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::One => "1",
            Phase::Two => "2",
            Phase::ModelFree => "mf",
            Phase::ModelBased => "mb",
        }
    }
}

/// One row of the metric trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub phase: Phase,
    /// Mean discounted return of the trajectories consumed this iteration
    /// (environment rollouts in phase 1 and the baselines, model rollouts in
    /// phase 2).
    pub mean_return: f64,
    /// Phase 1 and the model-based baseline: mean post-adaptation query
    /// loss. Phase 2: mean post-adaptation support loss on replayed tasks.
    /// Absent for the model-free baseline.
    pub model_val_loss: Option<f64>,
    pub env_batches: u64,
    pub sim_batches: u64,
    pub wall_ms: u64,
}

/// True once the last `window` validation losses have a relative range of at
/// most `tol`. Histories shorter than the window never count as converged.
pub fn model_converged(history: &[f64], window: usize, tol: f64) -> bool {
    if window < 2 || history.len() < window {
        return false;
    }
    let tail = &history[history.len() - window..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    if !max.is_finite() || !min.is_finite() {
        return false;
    }
    if max == min {
        return true;
    }
    (max - min) / max.abs() <= tol
}

/// Transition source for one replayed task in simulated training: the
/// adapted learned model, or the exact simulator when a test injects it.
pub enum TaskModel {
    Learned(DynamicsModel),
    Oracle(SimulatorModel),
}

impl TransitionModel for TaskModel {
    fn begin_episode(&mut self, init_obs: &Obs) {
        if let TaskModel::Oracle(sim) = self {
            sim.begin_episode(init_obs);
        }
    }

    fn predict(&mut self, obs: &Obs, action: env::Action) -> Obs {
        match self {
            TaskModel::Learned(model) => model.predict_next(obs, action),
            TaskModel::Oracle(sim) => sim.predict(obs, action),
        }
    }
}

/// Rolls a trajectory through a transition model under the policy. The
/// initial observation comes from `init`; rewards and termination follow the
/// environment's observation-space rules; provenance is `Sim`.
pub fn simulate_rollout<M: TransitionModel + ?Sized>(
    model: &mut M,
    policy: &Policy,
    init: &mut dyn FnMut(&mut ChaCha8Rng) -> Obs,
    rng: &mut ChaCha8Rng,
    max_len: usize,
    task_id: u64,
) -> Trajectory {
    let init_obs = init(rng);
    let mut controller = policy;
    drive_rollout(model, &mut controller, rng, max_len, init_obs, task_id, Provenance::Sim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Algo {
    DmRl,
    ModelFree,
    ModelBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrainPhase {
    Real,
    Simulated,
}

/// Mutable state of a training run.
pub struct TrainerState {
    hp: Hyperparams,
    algo: Algo,
    phase: TrainPhase,
    policy: Policy,
    model: Option<DynamicsModel>,
    buffer: DataBuffer,
    iteration: usize,
    env_batches: u64,
    sim_batches: u64,
    val_history: Vec<f64>,
    next_task_id: u64,
}

fn transitions_of(trajectories: &[Trajectory]) -> TransitionBatch {
    trajectories.iter().flat_map(|t| t.transitions()).collect()
}

impl TrainerState {
    pub fn new_dmrl(hp: Hyperparams, rng: &mut ChaCha8Rng) -> Result<TrainerState> {
        hp.validate()?;
        let policy = Policy::standard(rng);
        let model = DynamicsModel::standard(rng);
        Ok(TrainerState {
            hp,
            algo: Algo::DmRl,
            phase: TrainPhase::Real,
            policy,
            model: Some(model),
            buffer: DataBuffer::new(),
            iteration: 0,
            env_batches: 0,
            sim_batches: 0,
            val_history: Vec::new(),
            next_task_id: 0,
        })
    }

    pub fn new_model_free(hp: Hyperparams, rng: &mut ChaCha8Rng) -> Result<TrainerState> {
        hp.validate()?;
        let policy = Policy::standard(rng);
        Ok(TrainerState {
            hp,
            algo: Algo::ModelFree,
            phase: TrainPhase::Real,
            policy,
            model: None,
            buffer: DataBuffer::new(),
            iteration: 0,
            env_batches: 0,
            sim_batches: 0,
            val_history: Vec::new(),
            next_task_id: 0,
        })
    }

    pub fn new_model_based(hp: Hyperparams, rng: &mut ChaCha8Rng) -> Result<TrainerState> {
        hp.validate()?;
        let model = DynamicsModel::standard(rng);
        // The planner needs arbitrary fallback behavior before any data is
        // seen; a policy is never constructed for this baseline.
        let mut policy_rng = ChaCha8Rng::seed_from_u64(0);
        let policy = Policy::standard(&mut policy_rng);
        Ok(TrainerState {
            hp,
            algo: Algo::ModelBased,
            phase: TrainPhase::Real,
            policy,
            model: Some(model),
            buffer: DataBuffer::new(),
            iteration: 0,
            env_batches: 0,
            sim_batches: 0,
            val_history: Vec::new(),
            next_task_id: 0,
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn model(&self) -> Option<&DynamicsModel> {
        self.model.as_ref()
    }

    pub fn buffer(&self) -> &DataBuffer {
        &self.buffer
    }

    pub fn env_batches(&self) -> u64 {
        self.env_batches
    }

    pub fn sim_batches(&self) -> u64 {
        self.sim_batches
    }

    pub fn val_history(&self) -> &[f64] {
        &self.val_history
    }

    pub fn in_simulated_phase(&self) -> bool {
        self.phase == TrainPhase::Simulated
    }

    /// Whether the phase switch should happen before the next iteration:
    /// either the configured fixed iteration was reached, or the model's
    /// validation-loss history satisfies the convergence rule. Never before
    /// any data exists.
    pub fn should_switch(&self) -> bool {
        if self.algo != Algo::DmRl || self.phase != TrainPhase::Real || self.buffer.is_empty() {
            return false;
        }
        match self.hp.switch_iteration {
            Some(at) => self.iteration >= at,
            None => model_converged(
                &self.val_history,
                self.hp.convergence_window,
                self.hp.convergence_tol,
            ),
        }
    }

    /// Seals the buffer (freezing the model's input statistics with it) and
    /// moves to simulated training.
    pub fn begin_simulated_phase(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Err(Error::contract("cannot train on an empty buffer"));
        }
        if self.model.is_none() {
            return Err(Error::contract("simulated training requires a model"));
        }
        self.buffer.seal();
        self.phase = TrainPhase::Simulated;
        Ok(())
    }

    fn record_phase(&self) -> Phase {
        match (self.algo, self.phase) {
            (Algo::DmRl, TrainPhase::Real) => Phase::One,
            (Algo::DmRl, TrainPhase::Simulated) => Phase::Two,
            (Algo::ModelFree, _) => Phase::ModelFree,
            (Algo::ModelBased, _) => Phase::ModelBased,
        }
    }

    /// One joint meta-iteration on real data: sample tasks, roll out the
    /// current policy, bank everything, split per task, and apply the
    /// meta updates of both networks from the splits. Also used verbatim by
    /// the model-free baseline, which simply has no model to update.
    pub fn phase1_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<TrainRecord> {
        if self.phase != TrainPhase::Real {
            return Err(Error::contract("real-data iteration outside phase 1"));
        }
        let start = Instant::now();
        let hp = self.hp.clone();

        let mut jobs: Vec<(u64, TaskSpec, u64)> = Vec::with_capacity(hp.meta_batch_size);
        for _ in 0..hp.meta_batch_size {
            let id = self.next_task_id;
            self.next_task_id += 1;
            let spec = env::sample_task(rng);
            jobs.push((id, spec, rng.gen()));
        }

        let policy = self.policy.clone();
        let batches: Vec<(u64, TaskSpec, Vec<Trajectory>)> = jobs
            .par_iter()
            .map(|&(id, spec, seed)| {
                let mut task_rng = ChaCha8Rng::seed_from_u64(seed);
                let mut controller = &policy;
                let trajectories: Vec<Trajectory> = (0..hp.rollouts_per_task)
                    .map(|_| {
                        env::rollout(&spec, &mut controller, &mut task_rng, hp.max_rollout_len, id)
                    })
                    .collect();
                (id, spec, trajectories)
            })
            .collect();

        for (id, spec, trajectories) in &batches {
            self.buffer.append(*id, spec, trajectories.clone())?;
        }

        if let Some(model) = &mut self.model {
            let all: Vec<Transition> = self
                .buffer
                .tasks()
                .iter()
                .flat_map(|t| transitions_of(&t.trajectories))
                .collect();
            model.set_normalizer(Normalizer::from_transitions(&all));
        }

        let rule = SplitRule::new(hp.train_fraction)?;
        let mut policy_tasks = Vec::with_capacity(batches.len());
        let mut model_tasks = Vec::with_capacity(batches.len());
        for (_, _, trajectories) in &batches {
            let (train, test) = rule.split(trajectories)?;
            policy_tasks.push((train, test));
            model_tasks.push((transitions_of(train), transitions_of(test)));
        }

        self.policy = self
            .policy
            .meta_step(&policy_tasks, hp.beta, hp.beta_meta, hp.gamma)?;

        let mut val_loss = None;
        if let Some(model) = &self.model {
            let (updated, query_loss) =
                dynamics::meta_step(model, &model_tasks, hp.alpha, hp.alpha_meta)?;
            self.model = Some(updated);
            self.val_history.push(query_loss);
            val_loss = Some(query_loss);
        }

        let collected: Vec<Trajectory> = batches.into_iter().flat_map(|(_, _, t)| t).collect();
        let stats = ReturnStats::from_trajectories(&collected, hp.gamma)?;

        self.env_batches += 1;
        let record = TrainRecord {
            iteration: self.iteration,
            phase: self.record_phase(),
            mean_return: stats.mean,
            model_val_loss: val_loss,
            env_batches: self.env_batches,
            sim_batches: self.sim_batches,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        self.iteration += 1;
        Ok(record)
    }

    /// One meta-iteration on simulated data: replay buffered tasks, adapt
    /// the model to each, roll the policy inside the adapted models, and
    /// meta-update the policy from the splits. The environment is never
    /// touched here.
    pub fn phase2_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<TrainRecord> {
        let alpha = self.hp.alpha;
        self.phase2_iteration_with(rng, |task, meta_model| {
            let support = transitions_of(&task.trajectories);
            let (adapted, _steps) = dynamics::adapt_until(
                meta_model,
                &support,
                alpha,
                PHASE2_ADAPT_STEPS,
                PHASE2_ADAPT_TOL,
            )?;
            let support_loss = dynamics::model_loss(&adapted, &support)?;
            Ok((TaskModel::Learned(adapted), support_loss))
        })
    }

    /// [`Self::phase2_iteration`] with an injectable per-task transition
    /// model, so tests can substitute the exact simulator.
    pub fn phase2_iteration_with<F>(
        &mut self,
        rng: &mut ChaCha8Rng,
        model_for_task: F,
    ) -> Result<TrainRecord>
    where
        F: Fn(&TaskData, &DynamicsModel) -> Result<(TaskModel, f64)> + Sync,
    {
        if self.phase != TrainPhase::Simulated {
            return Err(Error::contract("simulated-data iteration outside phase 2"));
        }
        let env_before = self.env_batches;
        let start = Instant::now();
        let hp = self.hp.clone();
        let meta_model = self
            .model
            .clone()
            .ok_or_else(|| Error::contract("simulated training requires a model"))?;

        let sampled = self.buffer.sample_tasks(hp.meta_batch_size, rng)?;
        let jobs: Vec<(&TaskData, u64)> = sampled
            .into_iter()
            .map(|task| (task, rng.gen::<u64>()))
            .collect();

        let policy = self.policy.clone();
        let outcomes: Vec<Result<(Vec<Trajectory>, f64)>> = jobs
            .par_iter()
            .map(|&(task, seed)| {
                let (mut task_model, support_loss) = model_for_task(task, &meta_model)?;
                let mut task_rng = ChaCha8Rng::seed_from_u64(seed);
                let mut init = |r: &mut ChaCha8Rng| env::observe(&env::reset(&task.task, r));
                let trajectories: Vec<Trajectory> = (0..hp.rollouts_per_task)
                    .map(|_| {
                        simulate_rollout(
                            &mut task_model,
                            &policy,
                            &mut init,
                            &mut task_rng,
                            hp.max_rollout_len,
                            task.task_id,
                        )
                    })
                    .collect();
                Ok((trajectories, support_loss))
            })
            .collect();

        let mut simulated: Vec<Vec<Trajectory>> = Vec::with_capacity(outcomes.len());
        let mut support_loss_sum = 0.0;
        for outcome in outcomes {
            let (trajectories, loss) = outcome?;
            support_loss_sum += loss;
            simulated.push(trajectories);
        }
        let val_loss = support_loss_sum / simulated.len() as f64;

        let rule = SplitRule::new(hp.train_fraction)?;
        let mut policy_tasks = Vec::with_capacity(simulated.len());
        for trajectories in &simulated {
            policy_tasks.push(rule.split(trajectories)?);
        }
        self.policy = self
            .policy
            .meta_step(&policy_tasks, hp.beta, hp.beta_meta, hp.gamma)?;

        let collected: Vec<Trajectory> = simulated.into_iter().flatten().collect();
        let stats = ReturnStats::from_trajectories(&collected, hp.gamma)?;

        self.sim_batches += 1;
        assert_eq!(
            self.env_batches, env_before,
            "environment data consumed during simulated training"
        );
        let record = TrainRecord {
            iteration: self.iteration,
            phase: self.record_phase(),
            mean_return: stats.mean,
            model_val_loss: Some(val_loss),
            env_batches: self.env_batches,
            sim_batches: self.sim_batches,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        self.iteration += 1;
        Ok(record)
    }

    /// One iteration of the model-based baseline: collect rollouts whose
    /// actions come from the planner under the current meta-model, then
    /// meta-update the model on the splits.
    pub fn mb_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<TrainRecord> {
        if self.algo != Algo::ModelBased {
            return Err(Error::contract("planner iteration outside the model-based baseline"));
        }
        let start = Instant::now();
        let hp = self.hp.clone();
        let plan_cfg = hp.plan_config();
        let meta_model = self
            .model
            .clone()
            .ok_or_else(|| Error::contract("model-based baseline requires a model"))?;

        let mut jobs: Vec<(u64, TaskSpec, u64)> = Vec::with_capacity(hp.meta_batch_size);
        for _ in 0..hp.meta_batch_size {
            let id = self.next_task_id;
            self.next_task_id += 1;
            let spec = env::sample_task(rng);
            jobs.push((id, spec, rng.gen()));
        }

        let batches: Vec<Result<(u64, TaskSpec, Vec<Trajectory>)>> = jobs
            .par_iter()
            .map(|&(id, spec, seed)| {
                let mut task_rng = ChaCha8Rng::seed_from_u64(seed);
                let model_ref = &meta_model;
                let trajectories: Vec<Trajectory> = (0..hp.rollouts_per_task)
                    .map(|_| {
                        mpc::mb_rollout(&spec, &model_ref, &plan_cfg, &mut task_rng, hp.max_rollout_len, id)
                    })
                    .collect::<Result<_>>()?;
                Ok((id, spec, trajectories))
            })
            .collect();
        let batches: Vec<(u64, TaskSpec, Vec<Trajectory>)> =
            batches.into_iter().collect::<Result<_>>()?;

        for (id, spec, trajectories) in &batches {
            self.buffer.append(*id, spec, trajectories.clone())?;
        }

        if let Some(model) = &mut self.model {
            let all: Vec<Transition> = self
                .buffer
                .tasks()
                .iter()
                .flat_map(|t| transitions_of(&t.trajectories))
                .collect();
            model.set_normalizer(Normalizer::from_transitions(&all));
        }

        let rule = SplitRule::new(hp.train_fraction)?;
        let mut model_tasks = Vec::with_capacity(batches.len());
        for (_, _, trajectories) in &batches {
            let (train, test) = rule.split(trajectories)?;
            model_tasks.push((transitions_of(train), transitions_of(test)));
        }
        let model = self.model.as_ref().expect("model present");
        let (updated, query_loss) = dynamics::meta_step(model, &model_tasks, hp.alpha, hp.alpha_meta)?;
        self.model = Some(updated);
        self.val_history.push(query_loss);

        let collected: Vec<Trajectory> = batches.into_iter().flat_map(|(_, _, t)| t).collect();
        let stats = ReturnStats::from_trajectories(&collected, hp.gamma)?;

        self.env_batches += 1;
        let record = TrainRecord {
            iteration: self.iteration,
            phase: Phase::ModelBased,
            mean_return: stats.mean,
            model_val_loss: Some(query_loss),
            env_batches: self.env_batches,
            sim_batches: self.sim_batches,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        self.iteration += 1;
        Ok(record)
    }
}

/// Runs the double training scheme: real-data iterations until the switch
/// condition fires, then simulated-data iterations up to the iteration
/// budget. Returns the final policy, model, and the full metric trace.
pub fn train_dmrl(hp: &Hyperparams, seed: u64) -> Result<(Policy, DynamicsModel, Vec<TrainRecord>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = TrainerState::new_dmrl(hp.clone(), &mut rng)?;
    let mut trace = Vec::with_capacity(hp.n_iterations);
    for _ in 0..hp.n_iterations {
        if state.should_switch() {
            state.begin_simulated_phase()?;
        }
        let record = if state.in_simulated_phase() {
            state.phase2_iteration(&mut rng)?
        } else {
            state.phase1_iteration(&mut rng)?
        };
        trace.push(record);
    }
    let model = state.model.take().expect("joint training keeps a model");
    Ok((state.policy, model, trace))
}

/// Meta-trains the policy on environment data only.
pub fn train_mf_baseline(hp: &Hyperparams, seed: u64) -> Result<(Policy, Vec<TrainRecord>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = TrainerState::new_model_free(hp.clone(), &mut rng)?;
    let mut trace = Vec::with_capacity(hp.n_iterations);
    for _ in 0..hp.n_iterations {
        trace.push(state.phase1_iteration(&mut rng)?);
    }
    Ok((state.policy, trace))
}

/// Meta-trains the dynamics model on planner-collected environment data.
pub fn train_mb_baseline(hp: &Hyperparams, seed: u64) -> Result<(DynamicsModel, Vec<TrainRecord>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = TrainerState::new_model_based(hp.clone(), &mut rng)?;
    let mut trace = Vec::with_capacity(hp.n_iterations);
    for _ in 0..hp.n_iterations {
        trace.push(state.mb_iteration(&mut rng)?);
    }
    let model = state.model.take().expect("model-based baseline keeps a model");
    Ok((model, trace))
}
