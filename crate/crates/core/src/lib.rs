//! Software twin of a tabletop water channel in which a spinning cylinder
//! modulates its own drag.
//!
//! * [`lattice`]: D2Q9 channel flow past the rotating cylinder, force and
//!   wake diagnostics.
//! * [`env`]: the episodic control environment wrapped around the solver.
//! * [`flowsense`]: synthetic PIV images and dense optical-flow estimation.
//! * [`openloop`]: sinusoidal open-loop policies, grid sweeps, ternary search.
//! * [`replay`]: action-trajectory recording, open-loop replay, curves.

pub mod export;
pub mod field;
pub mod env;
pub mod flowsense;
pub mod lattice;
pub mod openloop;
pub mod replay;
