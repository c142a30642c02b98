//! Synthetic particle-image velocimetry: tracer particles advected by the
//! simulated flow, rendered into image pairs, and a dense inverse search
//! optical-flow estimator that turns the pairs back into a velocity field.

mod bench;
mod dis;
mod image;
mod particles;
mod pipeline;

pub use bench::{benchmark_aee, BENCH_BORDER, shifted_pair, uniform_shift_suite, wake_suite, BenchCase, BenchReport, CaseResult};
pub use dis::{estimate_flow, DisParams};
pub use image::{Image, ImagePair};
pub use particles::{render, Optics, ParticleSet};
pub use pipeline::{calibrate_and_downsample, Calibration, FlowSensor, FlowSensorConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("image {0}x{1} too small for two pyramid levels of {2}-pixel patches")]
    TooSmall(usize, usize, usize),
    #[error("exposure interval must be > 0, got {0}")]
    BadInterval(f64),
    #[error("invalid optics: {0}")]
    Optics(String),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
}
