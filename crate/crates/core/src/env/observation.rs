use serde::{Deserialize, Serialize};

use crate::field::FlowField;

/// What the agent sees after a reset or a step. Disabled fields are absent,
/// not zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    /// Smoothed shaft torque τ̂, mN·m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag: Option<f64>,
    /// Last commanded rate, normalized to [−1, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commanded_rate: Option<f64>,
    /// Motor rate ω/Ā.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_feedback: Option<f64>,
    /// Fraction of the episode elapsed, in [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_index: Option<f64>,
    /// 16×16 flow field, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowField>,
}

impl Observation {
    /// Names of the fields present.
    pub fn fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.drag.is_some() {
            out.push("drag");
        }
        if self.commanded_rate.is_some() {
            out.push("commanded_rate");
        }
        if self.rate_feedback.is_some() {
            out.push("rate_feedback");
        }
        if self.time_index.is_some() {
            out.push("time_index");
        }
        if self.flow.is_some() {
            out.push("flow");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// 1-based index of the step just taken.
    pub step: usize,
    /// Last raw torque sample, mN·m.
    pub raw_torque: f64,
    pub smoothed_torque: f64,
    /// True motor rate, rad/s.
    pub omega: f64,
    /// Commanded rate, rad/s.
    pub command: f64,
    /// The action was outside [−1, 1] and got clipped.
    pub clipped: bool,
    /// The flow estimate failed and an earlier one was substituted.
    pub flow_fallback: bool,
    /// Simulated time, seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}
