//! The episodic control environment: normalized actions, motor lag, torque
//! sensing and smoothing, reward, observation assembly and episode timing.

mod config;
mod log;
mod measure;
mod observation;
mod sim;

pub use config::{EnvConfig, FlowMode, LatencyMode, ObservationSet, Preset, Task, SHEDDING_FREQUENCY_BOUND};
pub use log::{write_line, EpisodeHeader, EpisodeLog, LogLine, RunManifest, StepRecord};
pub use measure::{compute_reward, motor_update, smooth_torque, TorqueBuffer};
pub use observation::{Observation, StepInfo, StepResult};
pub use sim::CylinderEnv;

use thiserror::Error;

use crate::flowsense::FlowError;
use crate::lattice::LatticeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("reset required")]
    ResetRequired,
    #[error("action {0} is not a number")]
    InvalidAction(f64),
    #[error("episode aborted: {0}")]
    Lattice(#[from] LatticeError),
    #[error("flow sensing failed: {0}")]
    Flow(#[from] FlowError),
}
