//! Deterministic planar lander whose transition function is parameterized by
//! a wind process.
//!
//! The craft starts at altitude 10 with discrete thrusters (main up, two
//! lateral) and must touch down slowly near the origin. Wind enters the
//! dynamics as a linear drag toward the wind velocity, so every wind setting
//! induces a different transition function; a task is exactly one wind
//! process. Integration is semi-implicit Euler with a fixed step.
//!
//! The reward and terminal rules are deliberately expressed over the observed
//! 5-vector `(x, y, vx, vy, fuel/100)` so that planners and model-simulated
//! rollouts can reuse them verbatim on predicted observations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rollout::{drive_rollout, Controller, TransitionModel};
use crate::trajectory::{Provenance, Trajectory};

pub const OBS_DIM: usize = 5;
/// Observation exposed to learners: `(x, y, vx, vy, fuel/100)`. The step
/// index is hidden; tasks must be inferred from the dynamics.
pub type Obs = [f64; OBS_DIM];

pub const DT: f64 = 0.1;
pub const GRAVITY: f64 = 1.0;
pub const DRAG: f64 = 0.5;
pub const MAIN_THRUST: f64 = 2.0;
pub const SIDE_THRUST: f64 = 1.0;
pub const INITIAL_ALTITUDE: f64 = 10.0;
pub const INITIAL_FUEL: f64 = 100.0;
pub const FUEL_SCALE: f64 = 100.0;
pub const X_BOUND: f64 = 10.0;
pub const LANDING_X: f64 = 1.0;
pub const LANDING_SPEED: f64 = 1.0;
pub const SHAPING_COEF: f64 = 0.01;
pub const THRUST_COST: f64 = 0.05;
pub const TERMINAL_BONUS: f64 = 100.0;
pub const WIND_LIMIT: f64 = 2.0;

pub const ACTION_COUNT: usize = 4;

/// Discrete thruster command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Noop,
    ThrustLeft,
    ThrustMain,
    ThrustRight,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [
        Action::Noop,
        Action::ThrustLeft,
        Action::ThrustMain,
        Action::ThrustRight,
    ];

    pub fn code(self) -> usize {
        match self {
            Action::Noop => 0,
            Action::ThrustLeft => 1,
            Action::ThrustMain => 2,
            Action::ThrustRight => 3,
        }
    }

    pub fn from_code(code: usize) -> Result<Action> {
        Action::ALL
            .get(code)
            .copied()
            .ok_or_else(|| Error::contract(format!("action code {code} out of range")))
    }

    pub fn is_thrust(self) -> bool {
        self != Action::Noop
    }

    /// Acceleration contributed by the thruster. The left thruster pushes the
    /// craft toward +x, the right one toward -x.
    fn thrust_accel(self) -> (f64, f64) {
        match self {
            Action::Noop => (0.0, 0.0),
            Action::ThrustLeft => (SIDE_THRUST, 0.0),
            Action::ThrustMain => (0.0, MAIN_THRUST),
            Action::ThrustRight => (-SIDE_THRUST, 0.0),
        }
    }
}

/// Full simulator state. Learners only ever see [`observe`] of this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub fuel: f64,
    pub t: usize,
}

/// One task: the wind process that defines the transition function.
/// Constant winds form the training distribution; sinusoidal winds appear
/// only at test time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskSpec {
    Constant { wx: f64, wy: f64 },
    Sinusoidal { ax: f64, ay: f64, freq_x: f64, freq_y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalKind {
    None,
    Landed,
    Crashed,
    OutOfBounds,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: LanderState,
    pub reward: f64,
    pub terminal: bool,
    pub terminal_kind: TerminalKind,
}

/// Draws a training task: constant wind with both components uniform on
/// [-WIND_LIMIT, WIND_LIMIT].
pub fn sample_task(rng: &mut ChaCha8Rng) -> TaskSpec {
    TaskSpec::Constant {
        wx: rng.gen_range(-WIND_LIMIT..=WIND_LIMIT),
        wy: rng.gen_range(-WIND_LIMIT..=WIND_LIMIT),
    }
}

/// Initial state distribution: x uniform on [-0.5, 0.5], fixed altitude,
/// zero velocity, full fuel. The task does not influence the start state.
pub fn reset(_task: &TaskSpec, rng: &mut ChaCha8Rng) -> LanderState {
    LanderState {
        x: rng.gen_range(-0.5..=0.5),
        y: INITIAL_ALTITUDE,
        vx: 0.0,
        vy: 0.0,
        fuel: INITIAL_FUEL,
        t: 0,
    }
}

/// Wind vector at step index `t`. Sinusoidal frequencies are in Hz against
/// the integration step `DT`.
pub fn wind_at(task: &TaskSpec, t: usize) -> (f64, f64) {
    match *task {
        TaskSpec::Constant { wx, wy } => (wx, wy),
        TaskSpec::Sinusoidal { ax, ay, freq_x, freq_y } => {
            let time = t as f64 * DT;
            (
                ax * (std::f64::consts::TAU * freq_x * time).sin(),
                ay * (std::f64::consts::TAU * freq_y * time).sin(),
            )
        }
    }
}

pub fn observe(state: &LanderState) -> Obs {
    [state.x, state.y, state.vx, state.vy, state.fuel / FUEL_SCALE]
}

/// Whether this action fires a thruster given the observed fuel level.
pub fn thrust_applies(obs: &Obs, action: Action) -> bool {
    action.is_thrust() && obs[4] > 0.0
}

/// Per-step shaping reward at the state where the action is taken.
pub fn shaping_reward(obs: &Obs, thrust_applied: bool) -> f64 {
    let mut r = -SHAPING_COEF * (obs[0].abs() + obs[2].abs() + obs[3].abs());
    if thrust_applied {
        r -= THRUST_COST;
    }
    r
}

/// Ground-contact and bounds classification of an observation. Timeout is
/// layered on top by the rollout loop, which knows the step index.
pub fn contact_terminal(obs: &Obs) -> TerminalKind {
    if obs[0].abs() > X_BOUND {
        return TerminalKind::OutOfBounds;
    }
    if obs[1] <= 0.0 {
        let speed = (obs[2] * obs[2] + obs[3] * obs[3]).sqrt();
        if obs[0].abs() <= LANDING_X && speed <= LANDING_SPEED {
            return TerminalKind::Landed;
        }
        return TerminalKind::Crashed;
    }
    TerminalKind::None
}

pub fn terminal_bonus(kind: TerminalKind) -> f64 {
    match kind {
        TerminalKind::Landed => TERMINAL_BONUS,
        TerminalKind::Crashed | TerminalKind::OutOfBounds => -TERMINAL_BONUS,
        TerminalKind::None | TerminalKind::Timeout => 0.0,
    }
}

/// Contact classification plus the timeout rule at step index `t_next`.
pub fn classify_step(next_obs: &Obs, t_next: usize, max_len: usize) -> TerminalKind {
    let kind = contact_terminal(next_obs);
    if kind == TerminalKind::None && t_next >= max_len {
        return TerminalKind::Timeout;
    }
    kind
}

/// Semi-implicit Euler update of the full state. A thrust command with empty
/// fuel behaves like a noop: no force, no decrement, no thrust cost.
fn physics_step(task: &TaskSpec, state: &LanderState, action: Action) -> LanderState {
    let (wx, wy) = wind_at(task, state.t);
    let applied = action.is_thrust() && state.fuel > 0.0;
    let (tx, ty) = if applied { action.thrust_accel() } else { (0.0, 0.0) };
    let ax = tx + DRAG * (wx - state.vx);
    let ay = -GRAVITY + ty + DRAG * (wy - state.vy);
    let vx = state.vx + ax * DT;
    let vy = state.vy + ay * DT;
    LanderState {
        x: state.x + vx * DT,
        y: state.y + vy * DT,
        vx,
        vy,
        fuel: if applied { state.fuel - 1.0 } else { state.fuel },
        t: state.t + 1,
    }
}

/// Advances one step. Stepping a state that is already terminal (by contact,
/// bounds, or the timeout rule at `max_len`) is a contract violation.
pub fn step(
    task: &TaskSpec,
    state: &LanderState,
    action: Action,
    max_len: usize,
) -> Result<StepOutcome> {
    let obs = observe(state);
    if classify_step(&obs, state.t, max_len) != TerminalKind::None {
        return Err(Error::contract("cannot step a terminal state"));
    }
    let applied = thrust_applies(&obs, action);
    let next_state = physics_step(task, state, action);
    let next_obs = observe(&next_state);
    let kind = classify_step(&next_obs, next_state.t, max_len);
    let reward = shaping_reward(&obs, applied) + terminal_bonus(kind);
    Ok(StepOutcome {
        next_state,
        reward,
        terminal: kind != TerminalKind::None,
        terminal_kind: kind,
    })
}

/// True transition function packaged as a [`TransitionModel`], so the same
/// rollout driver serves both the real environment and learned models, and
/// so planners can be run against the exact simulator.
///
/// The internal state is rebuilt from the observation at `begin_episode`;
/// that reconstruction is exact for episode starts (full fuel, step 0). When
/// planners clone it mid-flight the step index restarts at zero, which only
/// matters for sinusoidal tasks.
#[derive(Debug, Clone)]
pub struct SimulatorModel {
    task: TaskSpec,
    state: LanderState,
}

impl SimulatorModel {
    pub fn new(task: TaskSpec, state: LanderState) -> Self {
        SimulatorModel { task, state }
    }

    pub fn for_task(task: TaskSpec) -> Self {
        SimulatorModel {
            task,
            state: LanderState {
                x: 0.0,
                y: INITIAL_ALTITUDE,
                vx: 0.0,
                vy: 0.0,
                fuel: INITIAL_FUEL,
                t: 0,
            },
        }
    }

    fn state_from_obs(obs: &Obs) -> LanderState {
        LanderState {
            x: obs[0],
            y: obs[1],
            vx: obs[2],
            vy: obs[3],
            fuel: obs[4] * FUEL_SCALE,
            t: 0,
        }
    }
}

impl TransitionModel for SimulatorModel {
    fn begin_episode(&mut self, init_obs: &Obs) {
        self.state = Self::state_from_obs(init_obs);
    }

    fn predict(&mut self, obs: &Obs, action: Action) -> Obs {
        debug_assert_eq!(*obs, observe(&self.state), "simulator state desynced");
        self.state = physics_step(&self.task, &self.state, action);
        observe(&self.state)
    }
}

/// Samples a trajectory of at most `max_len` steps from the true environment
/// under the given controller. Tagged with env provenance and the
/// controller's parameter hash.
pub fn rollout<C: Controller>(
    task: &TaskSpec,
    controller: &mut C,
    rng: &mut ChaCha8Rng,
    max_len: usize,
    task_id: u64,
) -> Trajectory {
    let state = reset(task, rng);
    let init_obs = observe(&state);
    let mut model = SimulatorModel::new(*task, state);
    drive_rollout(&mut model, controller, rng, max_len, init_obs, task_id, Provenance::Env)
}
