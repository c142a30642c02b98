//! Two-dimensional lattice Boltzmann channel flow past a rotating cylinder.

mod config;
mod force;
mod sample;
mod state;
mod strouhal;

pub use config::{
    Collision, Discretization, FluidConfig, UnitConversion, XBoundary, YBoundary, CS, MAX_LATTICE_SPEED,
    MIN_CELLS_ACROSS_DIAMETER,
};
pub use force::{compute_force, drag_coefficient, ForceSample};
pub use sample::{sample_velocity_field, Window};
pub use state::{equilibrium, BoundaryLink, LatticeState, C, MIRROR_Y, OPP, Q, W};
pub use strouhal::{strouhal_of, Shedding, MIN_PERIODS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid fluid configuration: {0}")]
    Config(String),
    #[error("solver diverged at step {step} (non-finite or non-positive density); lower the lattice Mach number")]
    Divergence { step: u64 },
    #[error("rotation rate {omega} rad/s exceeds cap {cap} rad/s")]
    RotationOutOfRange { omega: f64, cap: f64 },
    #[error("sampling window {0} lies outside the fluid domain")]
    WindowOutside(String),
    #[error("no shedding peak in lift spectrum (steady wake)")]
    NoPeak,
    #[error("lift history spans {periods:.1} shedding periods, need at least {required}")]
    TooFewPeriods { periods: f64, required: f64 },
}

/// Convenience alias for [`LatticeState::new`].
pub fn init_lattice(config: FluidConfig) -> Result<LatticeState, LatticeError> {
    LatticeState::new(config)
}
