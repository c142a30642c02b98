use serde::{Deserialize, Serialize};

use super::{estimate_flow, render, DisParams, FlowError, ImagePair, Optics, ParticleSet};
use crate::field::{FlowField, FlowUnits};
use crate::lattice::{sample_velocity_field, LatticeState};

/// Pixel-to-physical mapping of one image pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub meters_per_px: [f64; 2],
    /// Interval between the two exposures, seconds.
    pub dt: f64,
}

/// Converts a px/frame field to m/s and box-filters it down to `out`,
/// averaging valid pixels only.
pub fn calibrate_and_downsample(
    field: &FlowField,
    calibration: &Calibration,
    out: (usize, usize),
) -> Result<FlowField, FlowError> {
    if !(calibration.dt > 0.0) {
        return Err(FlowError::BadInterval(calibration.dt));
    }
    let sx = calibration.meters_per_px[0] / calibration.dt;
    let sy = calibration.meters_per_px[1] / calibration.dt;
    let scaled = FlowField {
        u: field.u.iter().map(|u| u * sx).collect(),
        v: field.v.iter().map(|v| v * sy).collect(),
        units: FlowUnits::MetersPerSecond,
        ..field.clone()
    };
    Ok(scaled.box_resample(out.0, out.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSensorConfig {
    pub optics: Optics,
    pub dis: DisParams,
    /// Interval between exposures; `None` picks one that moves free-stream
    /// tracers by `target_displacement_px`.
    pub exposure: Option<f64>,
    pub target_displacement_px: f64,
    pub output: (usize, usize),
    /// Fewest valid pixels (fraction) for an estimate to be accepted.
    pub min_valid_fraction: f64,
}

impl Default for FlowSensorConfig {
    fn default() -> Self {
        FlowSensorConfig {
            optics: Optics::default(),
            dis: DisParams::default(),
            exposure: None,
            target_displacement_px: 4.0,
            output: (16, 16),
            min_valid_fraction: 0.5,
        }
    }
}

/// Synthetic camera plus estimator: truth field → particle images → dense
/// estimate → calibrated low-resolution field.
#[derive(Debug, Clone)]
pub struct FlowSensor {
    config: FlowSensorConfig,
    particles: ParticleSet,
    exposure: f64,
    seed: u64,
    frames: u64,
    last: Option<FlowField>,
}

impl FlowSensor {
    pub fn new(config: FlowSensorConfig, inflow_speed: f64, seed: u64) -> Result<Self, FlowError> {
        config.optics.validate()?;
        let exposure = match config.exposure {
            Some(dt) if dt > 0.0 => dt,
            Some(dt) => return Err(FlowError::BadInterval(dt)),
            None if inflow_speed > 0.0 => {
                config.target_displacement_px * config.optics.meters_per_px()[0] / inflow_speed
            }
            None => 1.0 / 60.0,
        };
        let particles = ParticleSet::seed(&config.optics, seed);
        Ok(FlowSensor { config, particles, exposure, seed, frames: 0, last: None })
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn config(&self) -> &FlowSensorConfig {
        &self.config
    }

    pub fn calibration(&self) -> Calibration {
        Calibration { meters_per_px: self.config.optics.meters_per_px(), dt: self.exposure }
    }

    /// Renders one image pair of the current flow.
    pub fn capture(&mut self, lattice: &LatticeState) -> Result<ImagePair, FlowError> {
        let o = &self.config.optics;
        let truth = sample_velocity_field(lattice, o.window, ((o.width_px / 4).max(2), (o.height_px / 4).max(2)))?;
        let noise = self.seed ^ self.frames.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let first = render(&self.particles, o, noise);
        self.particles.seed_and_advect(&truth, self.exposure);
        let second = render(&self.particles, o, noise.wrapping_add(1));
        self.frames += 1;
        ImagePair::new(first, second, lattice.time(), self.exposure)
    }

    /// One flow observation. When the estimate is unusable (too few valid
    /// pixels or non-finite values) the previous estimate, or zeros, is
    /// returned with the flag set.
    pub fn observe(&mut self, lattice: &LatticeState) -> Result<(FlowField, bool), FlowError> {
        let pair = self.capture(lattice)?;
        let dense = estimate_flow(&pair, &self.config.dis)?;
        let out = calibrate_and_downsample(&dense, &self.calibration(), self.config.output)?;
        let valid = dense.valid.iter().filter(|v| **v).count() as f64 / dense.len().max(1) as f64;
        let finite = out.u.iter().chain(&out.v).all(|x| x.is_finite());
        if valid >= self.config.min_valid_fraction && finite {
            self.last = Some(out.clone());
            return Ok((out, false));
        }
        let (w, h) = self.config.output;
        Ok((self.last.clone().unwrap_or_else(|| FlowField::zeros(w, h, FlowUnits::MetersPerSecond)), true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_arithmetic() {
        let f = FlowField::from_fn(32, 32, FlowUnits::PixelsPerFrame, |_, _| [1.0, 1.0]);
        let cal = Calibration { meters_per_px: [1e-4, 1e-4], dt: 1.0 / 60.0 };
        let out = calibrate_and_downsample(&f, &cal, (16, 16)).unwrap();
        assert_eq!(out.units, FlowUnits::MetersPerSecond);
        assert!(out.u.iter().all(|u| (u - 6e-3).abs() < 1e-15));
    }

    #[test]
    fn nonpositive_interval_is_rejected() {
        let f = FlowField::zeros(4, 4, FlowUnits::PixelsPerFrame);
        let cal = Calibration { meters_per_px: [1.0, 1.0], dt: 0.0 };
        assert_eq!(calibrate_and_downsample(&f, &cal, (2, 2)).unwrap_err(), FlowError::BadInterval(0.0));
    }

    #[test]
    fn all_invalid_input_gives_zero_invalid_output() {
        let mut f = FlowField::from_fn(32, 32, FlowUnits::PixelsPerFrame, |_, _| [3.0, 1.0]);
        f.valid.iter_mut().for_each(|v| *v = false);
        let cal = Calibration { meters_per_px: [1e-3, 1e-3], dt: 0.01 };
        let out = calibrate_and_downsample(&f, &cal, (16, 16)).unwrap();
        assert!(out.valid.iter().all(|v| !v));
        assert!(out.u.iter().chain(&out.v).all(|x| *x == 0.0));
    }
}
