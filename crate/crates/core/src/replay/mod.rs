//! Recording action trajectories, replaying them without feedback, and the
//! curves and transient diagnostics built from the results.

mod curves;
mod probe;
mod run;
mod trajectory;

pub use curves::{running_average_curve, step_times, CurveSet};
pub use probe::{anti_alignment_probe, classify_trace, ProbeEntry, ProbeInput, ProbeReport, TransientReport};
pub use run::{check_compatible, fresh_seeds, replay, replay_after, ReplayOutcome, SeedPolicy};
pub use trajectory::{record, ActionTrajectory, TrajectorySource};

use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("episode has {have} of {need} steps")]
    Truncated { have: usize, need: usize },
    #[error("action {value} at index {index} outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{0}")]
    Io(String),
}
