use serde::{Deserialize, Serialize};

use super::ReplayError;
use crate::openloop::{Evaluator, SinusoidPolicy};

/// Direction of the first response of a torque trace against the direction
/// it settles in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientReport {
    /// Smoothed torque one smoothing window after onset minus the value at
    /// onset, mN·m.
    pub initial_change: f64,
    /// Mean smoothed torque over the second half after onset minus the
    /// value at onset, mN·m.
    pub long_run_change: f64,
}

impl TransientReport {
    pub fn initial_sign(&self) -> i8 {
        sign(self.initial_change)
    }

    pub fn long_run_sign(&self) -> i8 {
        sign(self.long_run_change)
    }

    /// Initial and long-run changes point the same way.
    pub fn aligned(&self) -> bool {
        self.initial_sign() == self.long_run_sign()
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Classifies a smoothed-torque trace that starts at actuation onset.
/// `reference` is the smoothed torque at onset and `window` the number of
/// samples in one smoothing window.
pub fn classify_trace(trace: &[f64], reference: f64, window: usize) -> Result<TransientReport, ReplayError> {
    if window == 0 || trace.len() < 2 * window {
        return Err(ReplayError::ConfigMismatch(format!(
            "trace of {} samples too short for a {window}-sample window",
            trace.len()
        )));
    }
    let tail = &trace[trace.len() / 2..];
    Ok(TransientReport {
        initial_change: trace[window - 1] - reference,
        long_run_change: tail.iter().sum::<f64>() / tail.len() as f64 - reference,
    })
}

/// Actuation pattern tried by the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeInput {
    /// Full-cap spin-up, `ω = Ā·sign` from `onset` seconds on.
    Step { onset: f64, sign: f64 },
    Sinusoid(SinusoidPolicy),
}

impl ProbeInput {
    pub fn name(&self) -> String {
        match self {
            ProbeInput::Step { onset, sign } => format!("step(onset={onset}s,sign={sign})"),
            ProbeInput::Sinusoid(p) => format!("sinusoid(A={},f={})", p.amplitude, p.frequency),
        }
    }

    fn onset_step(&self, control_rate: f64) -> usize {
        match self {
            ProbeInput::Step { onset, .. } => (onset * control_rate).round() as usize,
            ProbeInput::Sinusoid(_) => 0,
        }
    }

    fn action(&self, k: usize, control_rate: f64, cap: f64) -> f64 {
        match self {
            ProbeInput::Step { sign, .. } => {
                if k >= self.onset_step(control_rate) {
                    sign.clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            }
            ProbeInput::Sinusoid(p) => p.action(k, control_rate, cap),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub name: String,
    pub input: ProbeInput,
    pub onset_step: usize,
    pub report: TransientReport,
    /// Smoothed torque after every step of the episode, mN·m.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub entries: Vec<ProbeEntry>,
    /// Pearson correlation of initial against long-run change across the
    /// entries; `None` with fewer than three entries or no spread.
    pub correlation: Option<f64>,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 3 {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let r = cov / (va * vb).sqrt();
    r.is_finite().then_some(r)
}

/// Runs each input for one episode on a copy of the prepared channel and
/// reports the direction of the first torque response against the
/// long-run one.
pub fn anti_alignment_probe(evaluator: &Evaluator, inputs: &[ProbeInput]) -> Result<ProbeReport, ReplayError> {
    let cfg = evaluator.config();
    let window = (cfg.smoothing_window * cfg.control_rate).round().max(1.0) as usize;
    let mut entries = Vec::with_capacity(inputs.len());
    for input in inputs {
        let onset = input.onset_step(cfg.control_rate);
        let mut env = evaluator.prototype().clone();
        env.reset_blind()?;
        let mut reference = env.smoothed_torque();
        let mut trace = Vec::with_capacity(cfg.episode_steps());
        for k in 0..cfg.episode_steps() {
            if k == onset {
                reference = env.smoothed_torque();
            }
            let a = input.action(k, cfg.control_rate, cfg.action_cap);
            trace.push(env.step_blind(a)?.2.smoothed_torque);
        }
        let report = classify_trace(&trace[onset.min(trace.len())..], reference, window)?;
        entries.push(ProbeEntry { name: input.name(), input: *input, onset_step: onset, report, trace });
    }
    let initial: Vec<f64> = entries.iter().map(|e| e.report.initial_change).collect();
    let long_run: Vec<f64> = entries.iter().map(|e| e.report.long_run_change).collect();
    Ok(ProbeReport { correlation: pearson(&initial, &long_run), entries })
}
