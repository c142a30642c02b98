use std::collections::VecDeque;

use super::{EnvError, Task};

/// Exact discretization of a first-order lag with time constant `tau`.
pub fn motor_update(omega: f64, command: f64, dt: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return command;
    }
    omega + (command - omega) * (1.0 - (-dt / tau).exp())
}

/// Arithmetic mean of the samples; NaN for an empty slice.
pub fn smooth_torque(samples: &[f64]) -> f64 {
    shifted_mean(samples.iter().copied(), samples.len())
}

/// Mean taken about the first sample, which makes it exact for constant
/// input and keeps round-off small for signals with a large offset.
fn shifted_mean(mut samples: impl Iterator<Item = f64>, n: usize) -> f64 {
    let Some(first) = samples.next() else { return f64::NAN };
    first + samples.map(|x| x - first).sum::<f64>() / n as f64
}

/// `s·(τ̂ − τ_start)/τ_nc`, with `s = +1` when maximizing.
pub fn compute_reward(tau_start: f64, tau_smoothed: f64, task: Task, tau_nc: f64) -> Result<f64, EnvError> {
    if !(tau_nc > 0.0) {
        return Err(EnvError::Config(format!("no-control baseline must be > 0, got {tau_nc}")));
    }
    Ok(task.sign() * (tau_smoothed - tau_start) / tau_nc)
}

/// Raw torque samples at a fixed cadence; keeps the trailing window only.
#[derive(Debug, Clone)]
pub struct TorqueBuffer {
    samples: VecDeque<f64>,
    capacity: usize,
}

impl TorqueBuffer {
    /// Buffer spanning `window` seconds of samples taken every `dt`.
    pub fn new(window: f64, dt: f64) -> Self {
        let capacity = ((window / dt).round() as usize).max(1);
        TorqueBuffer { samples: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, sample: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn last(&self) -> Option<f64> {
        self.samples.back().copied()
    }

    /// Mean of the window, or of all samples while fewer have arrived.
    /// Summed afresh each call so the value carries no accumulated drift.
    pub fn mean(&self) -> f64 {
        shifted_mean(self.samples.iter().copied(), self.samples.len())
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}
