//! Command-line front end for the double meta-reinforcement learning
//! trainer: configuration, training and evaluation modes, checkpoint I/O,
//! and CSV reporting.

pub mod checkpoint;
pub mod config;
pub mod evaluate;
pub mod report;
pub mod run;
pub mod selftest;

pub use checkpoint::{load_checkpoint, save_checkpoint, Artifact};
pub use config::{Mode, RunConfig, UsageError};
pub use evaluate::{eval_adaptation, EvalReport, Scenario};
pub use run::run;
