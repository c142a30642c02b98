use serde::{Deserialize, Serialize};

use super::LatticeError;

/// Lattice speed of sound, `c_s = 1/sqrt(3)`.
pub const CS: f64 = 0.577_350_269_189_625_8;

/// Largest lattice speed accepted anywhere in the domain, as a fraction of `c_s`.
pub const MAX_LATTICE_SPEED: f64 = 0.3 * CS;

/// Fewest cells allowed across the cylinder diameter.
pub const MIN_CELLS_ACROSS_DIAMETER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Collision {
    /// Two-relaxation-time operator; `magic` is the product
    /// `(1/ω⁺ − ½)(1/ω⁻ − ½)`. 3/16 places halfway bounce-back walls exactly.
    Trt { magic: f64 },
    Bgk,
    /// Regularized BGK: non-equilibrium parts beyond the second moment are
    /// discarded, and the trace of the second moment relaxes at `bulk`
    /// (bulk viscosity `(1/bulk − ½)/3`). Damps acoustic resonance in
    /// confined channels at small shear viscosity.
    Regularized { bulk: f64 },
}

impl Default for Collision {
    fn default() -> Self {
        Collision::Trt { magic: 3.0 / 16.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum XBoundary {
    /// Velocity inlet on the left, zero-gradient outlet on the right.
    #[default]
    InflowOutflow,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum YBoundary {
    /// No-slip channel walls (halfway bounce-back).
    #[default]
    Walls,
    Periodic,
    /// Free-slip walls (specular reflection); no boundary layer grows.
    Slip,
}

/// Physical description of the channel, the cylinder and the discretization.
///
/// All lengths in metres, speeds in m/s, rates in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluidConfig {
    pub inflow_speed: f64,
    pub cylinder_radius: f64,
    pub channel_height: f64,
    pub channel_length: f64,
    /// Distance of the cylinder axis from the inlet.
    pub cylinder_center_x: f64,
    pub kinematic_viscosity: f64,
    pub fluid_density: f64,
    /// Immersed cylinder length used to turn 2D force per unit depth into newtons.
    pub span: f64,
    /// Lever arm turning drag force into shaft torque.
    pub lever_arm: f64,
    pub cells_across_diameter: usize,
    /// Target inflow Mach number in lattice units; sets `dt`.
    pub lattice_mach: f64,
    /// Explicit time step; overrides the Mach target when set.
    pub time_step: Option<f64>,
    /// Largest rotation rate the solver must support (stability check).
    pub max_rotation_rate: f64,
    /// Transverse startup perturbation, relative to the inflow speed.
    pub perturbation: f64,
    pub collision: Collision,
    pub x_boundary: XBoundary,
    pub y_boundary: YBoundary,
    pub cylinder: bool,
    /// Length of the density-absorbing layer in front of the outlet, in
    /// cylinder diameters (open channels only).
    pub sponge_diameters: f64,
    /// Uniform body acceleration in m/s² (driven periodic flows).
    pub body_acceleration: [f64; 2],
    pub seed: u64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl FluidConfig {
    /// Desk-scale channel: the rig's geometry and inflow at Re = 200,
    /// 40 cells across the diameter.
    pub fn desk() -> Self {
        let radius = 0.021;
        let speed = 0.12;
        FluidConfig {
            inflow_speed: speed,
            cylinder_radius: radius,
            channel_height: 0.1,
            channel_length: 0.4,
            cylinder_center_x: 0.1,
            kinematic_viscosity: speed * 2.0 * radius / 200.0,
            fluid_density: 1000.0,
            span: 0.1,
            lever_arm: 1.0,
            cells_across_diameter: 40,
            lattice_mach: 0.05,
            time_step: None,
            max_rotation_rate: 15.7,
            perturbation: 1e-3,
            collision: Collision::Regularized { bulk: 1.0 },
            x_boundary: XBoundary::InflowOutflow,
            y_boundary: YBoundary::Walls,
            cylinder: true,
            sponge_diameters: 2.0,
            body_acceleration: [0.0, 0.0],
            seed: 0,
        }
    }

    /// The rig's nominal regime (Re ≈ 5×10³). Expressible, not validated.
    pub fn paper() -> Self {
        let mut cfg = Self::desk();
        cfg.kinematic_viscosity = 1.0e-6;
        cfg
    }

    /// Reduced-resolution desk channel (20 cells across D, Mach 0.07) used
    /// by the test suites and quick sweeps. Mach 0.1 diverges within seconds
    /// of a full-cap spin.
    pub fn desk_coarse() -> Self {
        FluidConfig {
            cells_across_diameter: 20,
            lattice_mach: 0.07,
            ..Self::desk()
        }
    }

    /// Nearly unconfined cylinder for wake benchmarks: blockage 0.1 between
    /// free-slip walls, axis seven diameters behind the inlet, 25 diameters
    /// long, 20 cells across D at Mach 0.1.
    pub fn benchmark(re: f64) -> Self {
        let d = 2.0 * 0.021;
        FluidConfig {
            channel_height: 10.0 * d,
            channel_length: 25.0 * d,
            cylinder_center_x: 7.0 * d,
            y_boundary: YBoundary::Slip,
            lattice_mach: 0.1,
            max_rotation_rate: 0.0,
            ..Self::desk_coarse()
        }
        .with_reynolds(re)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.cylinder_radius
    }

    pub fn reynolds(&self) -> f64 {
        self.inflow_speed * self.diameter() / self.kinematic_viscosity
    }

    pub fn blockage_ratio(&self) -> f64 {
        self.diameter() / self.channel_height
    }

    /// Sets the viscosity so that `U∞·D/ν` equals `re`.
    pub fn with_reynolds(mut self, re: f64) -> Self {
        self.kinematic_viscosity = self.inflow_speed * self.diameter() / re;
        self
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let bad = |msg: String| Err(LatticeError::Config(msg));
        if !(self.kinematic_viscosity > 0.0) {
            return bad(format!("kinematic viscosity must be > 0, got {}", self.kinematic_viscosity));
        }
        if !(self.inflow_speed >= 0.0) {
            return bad(format!("inflow speed must be >= 0, got {}", self.inflow_speed));
        }
        if !(self.cylinder_radius > 0.0) {
            return bad(format!("cylinder radius must be > 0, got {}", self.cylinder_radius));
        }
        if !(self.channel_height > 0.0 && self.channel_length > 0.0) {
            return bad("channel dimensions must be > 0".into());
        }
        if self.cylinder {
            let br = self.blockage_ratio();
            if !(br > 0.0 && br < 1.0) {
                return bad(format!("blockage ratio D/H = {br} outside (0, 1)"));
            }
            let cx = self.cylinder_center_x;
            if cx - self.cylinder_radius <= 0.0 || cx + self.cylinder_radius >= self.channel_length {
                return bad(format!("cylinder at x = {cx} does not fit in the channel"));
            }
        }
        if self.cells_across_diameter < MIN_CELLS_ACROSS_DIAMETER {
            return bad(format!(
                "cells across diameter = {} below minimum {}",
                self.cells_across_diameter, MIN_CELLS_ACROSS_DIAMETER
            ));
        }
        if !(self.fluid_density > 0.0 && self.span > 0.0) {
            return bad("fluid density and span must be > 0".into());
        }
        if !(self.lever_arm >= 0.0) {
            return bad("lever arm must be >= 0".into());
        }
        if let Some(dt) = self.time_step {
            if !(dt > 0.0) {
                return bad(format!("time step must be > 0, got {dt}"));
            }
        } else if !(self.lattice_mach > 0.0) {
            return bad(format!("lattice Mach target must be > 0, got {}", self.lattice_mach));
        }
        if let Collision::Regularized { bulk } = self.collision {
            if !(bulk > 0.0 && bulk < 2.0) {
                return bad(format!("bulk relaxation rate must lie in (0, 2), got {bulk}"));
            }
        }
        if !(self.sponge_diameters >= 0.0) {
            return bad("sponge length must be >= 0".into());
        }
        if !(self.max_rotation_rate >= 0.0) {
            return bad("max rotation rate must be >= 0".into());
        }
        Ok(())
    }
}

/// Conversion between lattice and physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitConversion {
    /// Cell size (m).
    pub dx: f64,
    /// Time step (s).
    pub dt: f64,
    /// Mass of one cell of depth `dx` at reference density (kg).
    pub mass: f64,
    /// Newtons per lattice force unit, including the span.
    pub force: f64,
    pub lever_arm: f64,
}

impl UnitConversion {
    pub fn velocity(&self) -> f64 {
        self.dx / self.dt
    }

    pub fn to_lattice_speed(&self, v: f64) -> f64 {
        v * self.dt / self.dx
    }

    pub fn to_lattice_viscosity(&self, nu: f64) -> f64 {
        nu * self.dt / (self.dx * self.dx)
    }

    pub fn to_lattice_acceleration(&self, a: f64) -> f64 {
        a * self.dt * self.dt / self.dx
    }
}

/// Derived discretization of a [`FluidConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub nx: usize,
    pub ny: usize,
    pub units: UnitConversion,
    pub nu: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub inflow: f64,
    /// Cylinder centre and radius in lattice coordinates (node `i` sits at `i`).
    pub center: [f64; 2],
    pub radius: f64,
    pub accel: [f64; 2],
}

impl Discretization {
    pub fn new(cfg: &FluidConfig) -> Result<Self, LatticeError> {
        cfg.validate()?;
        let dx = cfg.diameter() / cfg.cells_across_diameter as f64;
        let nx = (cfg.channel_length / dx).round() as usize;
        let ny = (cfg.channel_height / dx).round() as usize;
        if nx < 3 || ny < 3 {
            return Err(LatticeError::Config(format!("grid {nx}x{ny} too small")));
        }
        let wall_speed = cfg.cylinder_radius * cfg.max_rotation_rate;
        let reference = if cfg.cylinder { cfg.inflow_speed.max(wall_speed) } else { cfg.inflow_speed };
        let dt = match cfg.time_step {
            Some(dt) => dt,
            None if cfg.inflow_speed > 0.0 => cfg.lattice_mach * CS * dx / cfg.inflow_speed,
            None if reference > 0.0 => cfg.lattice_mach * CS * dx / reference,
            // Quiescent fluid: pick τ = 1.
            None => dx * dx / (6.0 * cfg.kinematic_viscosity),
        };
        let mass = cfg.fluid_density * dx * dx * dx;
        let units = UnitConversion {
            dx,
            dt,
            mass,
            force: cfg.fluid_density * dx * dx * dx / (dt * dt) * cfg.span,
            lever_arm: cfg.lever_arm,
        };
        // On the side of the cylinder that turns with the stream the two
        // speeds add.
        let advancing = cfg.inflow_speed + if cfg.cylinder { wall_speed } else { 0.0 };
        for (name, v) in [("inflow", cfg.inflow_speed), ("inflow plus cylinder surface", advancing)] {
            let lat = units.to_lattice_speed(v);
            if lat >= MAX_LATTICE_SPEED {
                return Err(LatticeError::Config(format!(
                    "{name} lattice speed {lat:.4} violates stability bound 0.3·c_s = {MAX_LATTICE_SPEED:.4}"
                )));
            }
        }
        let nu = units.to_lattice_viscosity(cfg.kinematic_viscosity);
        let tau = 3.0 * nu + 0.5;
        let omega_plus = 1.0 / tau;
        let omega_minus = match cfg.collision {
            Collision::Bgk | Collision::Regularized { .. } => omega_plus,
            Collision::Trt { magic } => {
                if !(magic > 0.0) {
                    return Err(LatticeError::Config(format!("TRT magic parameter must be > 0, got {magic}")));
                }
                1.0 / (0.5 + magic / (tau - 0.5))
            }
        };
        Ok(Discretization {
            nx,
            ny,
            units,
            nu,
            omega_plus,
            omega_minus,
            inflow: units.to_lattice_speed(cfg.inflow_speed),
            center: [cfg.cylinder_center_x / dx - 0.5, ny as f64 / 2.0 - 0.5],
            radius: cfg.cylinder_radius / dx,
            accel: [
                units.to_lattice_acceleration(cfg.body_acceleration[0]),
                units.to_lattice_acceleration(cfg.body_acceleration[1]),
            ],
        })
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.omega_plus
    }
}
