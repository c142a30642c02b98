use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::ReplayError;
use crate::env::{EnvConfig, EpisodeLog, ObservationSet, Task};

/// Where a trajectory came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySource {
    pub session: String,
    pub episode: usize,
    /// Observation set the recording agent saw.
    pub observation: ObservationSet,
}

/// The normalized actions of one complete episode, plus what is needed to
/// check that a replay runs under the same protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTrajectory {
    pub actions: Vec<f64>,
    pub source: TrajectorySource,
    pub config_hash: String,
    pub control_rate: f64,
    pub episode_steps: usize,
    pub action_cap: f64,
    pub task: Task,
    /// No-control torque the recording was normalized by, mN·m.
    pub tau_nc: f64,
}

impl ActionTrajectory {
    /// A trajectory of given actions under `config`, e.g. a sinusoid.
    pub fn from_actions(actions: Vec<f64>, config: &EnvConfig, tau_nc: f64, session: &str) -> Result<Self, ReplayError> {
        let t = ActionTrajectory {
            actions,
            source: TrajectorySource { session: session.into(), episode: 0, observation: config.observation },
            config_hash: config.hash(),
            control_rate: config.control_rate,
            episode_steps: config.episode_steps(),
            action_cap: config.action_cap,
            task: config.task,
            tau_nc,
        };
        t.validate()?;
        Ok(t)
    }

    /// Length matches the episode and every action lies in [−1, 1].
    pub fn validate(&self) -> Result<(), ReplayError> {
        if self.actions.len() != self.episode_steps {
            return Err(ReplayError::Truncated { have: self.actions.len(), need: self.episode_steps });
        }
        if let Some((index, &value)) = self.actions.iter().enumerate().find(|(_, a)| !(a.abs() <= 1.0)) {
            return Err(ReplayError::OutOfRange { index, value });
        }
        Ok(())
    }

    pub fn write_json(&self, w: impl Write) -> io::Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(io::Error::from)
    }

    /// Reads and validates a trajectory file.
    pub fn read_json(r: impl Read) -> Result<Self, ReplayError> {
        let t: ActionTrajectory = serde_json::from_reader(r).map_err(|e| ReplayError::Io(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }
}

/// Extracts the commanded actions of a complete episode log verbatim.
pub fn record(log: &EpisodeLog) -> Result<ActionTrajectory, ReplayError> {
    let h = &log.header;
    if !log.is_complete() {
        return Err(ReplayError::Truncated { have: log.steps.len(), need: h.episode_steps });
    }
    if let Some((k, s)) = log.steps.iter().enumerate().find(|(k, s)| s.step != k + 1) {
        return Err(ReplayError::Io(format!("step record {k} carries index {}", s.step)));
    }
    let t = ActionTrajectory {
        actions: log.actions(),
        source: TrajectorySource { session: h.source.clone(), episode: h.episode, observation: h.observation },
        config_hash: h.config_hash.clone(),
        control_rate: h.control_rate,
        episode_steps: h.episode_steps,
        action_cap: h.action_cap,
        task: h.task,
        tau_nc: h.tau_nc,
    };
    t.validate()?;
    Ok(t)
}
