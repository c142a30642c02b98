use serde::{Deserialize, Serialize};

use super::state::{LatticeState, C, Q, W};

/// Instantaneous hydrodynamic load on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    /// Force along the mean flow (+x), newtons.
    pub drag: f64,
    /// Transverse force (+y), newtons.
    pub lift: f64,
    /// `drag · lever_arm`, mN·m.
    pub torque: f64,
    /// Simulated time, seconds.
    pub time: f64,
}

/// Momentum exchange over the cylinder links: the momentum of the
/// populations that will hit the wall in the next stream plus that of the
/// bounced populations, moving-wall term included. This is exactly the
/// momentum the fluid loses to the cylinder in that step.
///
/// Links are summed in a fixed order, so the result is a deterministic
/// function of the state.
pub fn compute_force(state: &LatticeState) -> ForceSample {
    let units = state.units();
    let f = state.distributions();
    let rho = state.density();
    let wall_speed = state.omega() * units.dt * state.discretization().radius;
    let leak = state.wall_leak(state.omega());
    let (mut fx, mut fy) = (0.0, 0.0);
    for link in state.links() {
        let j = link.dir;
        let (cx, cy) = (C[j][0] as f64, C[j][1] as f64);
        let uw = [wall_speed * link.tangent[0], wall_speed * link.tangent[1]];
        let out = f[link.cell * Q + j];
        let back = out - W[j] * (6.0 * rho[link.cell] * (cx * uw[0] + cy * uw[1]) + leak);
        fx += cx * (out + back);
        fy += cy * (out + back);
    }
    let drag = fx * units.force;
    ForceSample { drag, lift: fy * units.force, torque: drag * units.lever_arm * 1e3, time: state.time() }
}

/// `C_d = F / (ρ U∞² R · span)`, i.e. drag per unit span over `½ρU∞²D`.
pub fn drag_coefficient(state: &LatticeState, drag: f64) -> f64 {
    let cfg = state.config();
    drag / (cfg.fluid_density * cfg.inflow_speed * cfg.inflow_speed * cfg.cylinder_radius * cfg.span)
}
