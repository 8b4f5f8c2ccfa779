//! Double meta-reinforcement learning at desk scale.
//!
//! A policy and a dynamics model are meta-trained jointly on a windy planar
//! lander; once the model converges, the policy keeps meta-training purely on
//! model-generated rollouts, so later training costs no environment data.
//! The crate also ships the two baselines this is measured against: a
//! model-free meta-policy learner and a model-based learner acting through a
//! random-shooting planner.
//!
//! Modules:
//! - [`nn`]: flat-parameter MLP with explicit forward/backward passes
//! - [`env`]: the windy-lander simulator and its reward rules
//! - [`trajectory`], [`buffer`]: rollout data and the per-task store
//! - [`policy`]: categorical policy, REINFORCE gradients, meta updates
//! - [`dynamics`]: residual transition model, adaptation, meta updates
//! - [`mpc`]: random-shooting planner
//! - [`trainer`]: the two-phase scheme and both baselines
//!
//! Every source of randomness is an explicit seeded generator and all
//! parallel sections combine results in a fixed order, so whole training
//! runs replay bit-identically from a seed.

pub mod buffer;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod mpc;
pub mod nn;
pub mod policy;
pub mod rollout;
pub mod trainer;
pub mod trajectory;

pub use buffer::{DataBuffer, SplitRule, TaskData};
pub use dynamics::{DynamicsModel, Normalizer, TransitionBatch};
pub use env::{Action, LanderState, Obs, StepOutcome, TaskSpec, TerminalKind, OBS_DIM};
pub use error::{Error, Result};
pub use mpc::{CandidateScore, MpcController, PlanConfig};
pub use nn::{Gradient, Head, MlpSpec, ParamVector};
pub use policy::{Policy, ReturnStats};
pub use rollout::{Controller, TransitionModel, UniformController};
pub use trainer::{Hyperparams, Phase, TrainRecord, TrainerState};
pub use trajectory::{Provenance, Step, Trajectory, Transition};
