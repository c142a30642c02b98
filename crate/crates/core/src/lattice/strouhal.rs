use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{ForceSample, LatticeError};

/// Fewest shedding periods a lift history must span.
pub const MIN_PERIODS: f64 = 20.0;
/// Peak-to-median spectral power ratio below which the wake counts as steady.
const PEAK_RATIO: f64 = 100.0;
/// Lift oscillation below this fraction of the mean drag counts as no shedding.
const MIN_RELATIVE_AMPLITUDE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shedding {
    /// Dominant lift frequency, Hz.
    pub frequency: f64,
    pub strouhal: f64,
    /// Number of shedding periods covered by the history.
    pub periods: f64,
}

/// Dominant lift-oscillation frequency from the spectral peak of a history
/// sampled at a fixed rate, and `St = f·D/U∞`.
pub fn strouhal_of(history: &[ForceSample], diameter: f64, speed: f64) -> Result<Shedding, LatticeError> {
    if history.len() < 8 {
        return Err(LatticeError::NoPeak);
    }
    let n = history.len();
    let dt = (history[n - 1].time - history[0].time) / (n - 1) as f64;
    let duration = dt * n as f64;
    let mean_lift = history.iter().map(|s| s.lift).sum::<f64>() / n as f64;
    let mean_drag = history.iter().map(|s| s.drag.abs()).sum::<f64>() / n as f64;
    let rms = (history.iter().map(|s| (s.lift - mean_lift).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(rms > MIN_RELATIVE_AMPLITUDE * mean_drag) {
        return Err(LatticeError::NoPeak);
    }

    let padded = (4 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = history
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            Complex::new((s.lift - mean_lift) * hann, 0.0)
        })
        .collect();
    buf.resize(padded, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm_sqr()).collect();

    let (peak, &peak_power) = power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(LatticeError::NoPeak)?;
    let mut sorted = power[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if !(peak_power > PEAK_RATIO * median) {
        return Err(LatticeError::NoPeak);
    }
    // Parabolic refinement on log power.
    let mut bin = peak as f64;
    if peak + 1 < power.len() {
        let (a, b, c) = (power[peak - 1].max(1e-300).ln(), peak_power.ln(), power[peak + 1].max(1e-300).ln());
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            bin += 0.5 * (a - c) / denom;
        }
    }
    let frequency = bin / (padded as f64 * dt);
    let periods = frequency * duration;
    if periods < MIN_PERIODS {
        return Err(LatticeError::TooFewPeriods { periods, required: MIN_PERIODS });
    }
    Ok(Shedding { frequency, strouhal: frequency * diameter / speed, periods })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> Vec<ForceSample> {
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                ForceSample { drag: 1.0, lift: f(t), torque: 1.0, time: t }
            })
            .collect()
    }

    #[test]
    fn recovers_pure_tone() {
        let h = history(|t| 0.3 * (2.0 * std::f64::consts::PI * 0.83 * t).sin(), 3000, 0.02);
        let s = strouhal_of(&h, 0.042, 0.12).unwrap();
        assert!((s.frequency - 0.83).abs() < 2e-3, "{s:?}");
        assert!((s.strouhal - 0.83 * 0.042 / 0.12).abs() < 1e-3);
    }

    #[test]
    fn flat_signal_has_no_peak() {
        let h = history(|_| 0.0, 2000, 0.01);
        assert_eq!(strouhal_of(&h, 0.042, 0.12).unwrap_err(), LatticeError::NoPeak);
    }

    #[test]
    fn short_history_is_rejected() {
        let h = history(|t| (2.0 * std::f64::consts::PI * 1.0 * t).sin(), 500, 0.01);
        assert!(matches!(strouhal_of(&h, 0.042, 0.12), Err(LatticeError::TooFewPeriods { .. })));
    }
}
