//! Open-loop sinusoidal forcing: scoring, grid sweeps and ternary search
//! over the forcing frequency.

mod policy;
mod sweep;
mod ternary;

pub use policy::{episode_score, eval_sinusoid, run_open_loop, Evaluator, PolicyScore, SinusoidPolicy, MIN_UPDATES_PER_PERIOD};
pub use sweep::{grid_sweep, Grid, SweepCache, SweepCell, SweepOptions, SweepTable, PAPER_AMPLITUDES};
pub use ternary::{final_width, ternary_search, ternary_sinusoid, Estimate, TernaryResult};

use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum OpenLoopError {
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("all {0} repetitions failed")]
    AllRepsFailed(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("sweep cache: {0}")]
    Io(#[from] std::io::Error),
}
