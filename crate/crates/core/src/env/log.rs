use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{LatencyMode, ObservationSet, Task};

/// First line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub episode: usize,
    pub episode_steps: usize,
    pub control_rate: f64,
    pub action_cap: f64,
    pub task: Task,
    pub observation: ObservationSet,
    pub config_hash: String,
    pub seed: u64,
    /// Smoothed torque when the episode started, mN·m.
    pub tau_start: f64,
    /// No-control baseline, mN·m.
    pub tau_nc: f64,
    /// Free-form origin, e.g. a session id.
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Normalized commanded action after clipping.
    pub action: f64,
    /// Motor rate, rad/s.
    pub omega: f64,
    pub torque_raw: f64,
    pub torque_smoothed: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(EpisodeHeader),
    Step(StepRecord),
}

/// One episode: header plus one record per control step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn is_complete(&self) -> bool {
        self.steps.len() == self.header.episode_steps
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn actions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        write_line(&mut w, &LogLine::Header(self.header.clone()))?;
        for s in &self.steps {
            write_line(&mut w, &LogLine::Step(*s))?;
        }
        w.flush()
    }

    /// Reads a log. A final line cut short by a crash is dropped; any other
    /// malformed line is an error.
    pub fn read_jsonl(r: impl BufRead) -> io::Result<Self> {
        let lines: Vec<String> = r.lines().collect::<io::Result<_>>()?;
        let mut header = None;
        let mut steps = Vec::new();
        let last = lines.iter().rposition(|l| !l.trim().is_empty()).unwrap_or(0);
        for (k, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = match serde_json::from_str(line) {
                Ok(p) => p,
                Err(_) if k == last && header.is_some() => break,
                Err(e) => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", k + 1))),
            };
            match parsed {
                LogLine::Header(h) if header.is_none() => header = Some(h),
                LogLine::Header(_) => {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, format!("line {}: second header", k + 1)))
                }
                LogLine::Step(s) => steps.push(s),
            }
        }
        let header = header.ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "missing header"))?;
        Ok(EpisodeLog { header, steps })
    }
}

/// Appends one JSON line and flushes, so a killed process leaves every
/// completed record on disk.
pub fn write_line(mut w: impl Write, line: &LogLine) -> io::Result<()> {
    serde_json::to_writer(&mut w, line)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Run-level metadata written next to the episode logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Crate version.
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub latency: LatencyMode,
    /// Which torque signal the reward uses.
    pub reward_signal: String,
    pub tau_nc: Option<f64>,
    pub episodes: usize,
    /// Control steps taken by the agent.
    pub agent_steps: u64,
    /// Simulated seconds spent in agent-controlled episodes.
    pub virtual_time_s: f64,
    pub wall_time_s: f64,
    pub clipped_actions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pacing: Option<String>,
    /// Conventional step count quoted for a 60-episode budget. The raw count
    /// for 60 × 1800 is 108 000; both are reported, neither is corrected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated_budget_steps: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EpisodeLog {
        EpisodeLog {
            header: EpisodeHeader {
                episode: 0,
                episode_steps: 3,
                control_rate: 30.0,
                action_cap: 15.7,
                task: Task::Maximize,
                observation: ObservationSet::default(),
                config_hash: "ab".into(),
                seed: 1,
                tau_start: 100.0,
                tau_nc: 90.0,
                source: String::new(),
            },
            steps: (1..=3)
                .map(|k| StepRecord {
                    step: k,
                    action: 0.1 * k as f64,
                    omega: 1.0,
                    torque_raw: 101.0,
                    torque_smoothed: 100.5,
                    reward: 0.01,
                })
                .collect(),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 4);
        assert_eq!(EpisodeLog::read_jsonl(&buf[..]).unwrap(), log);
    }

    #[test]
    fn torn_last_line_is_dropped() {
        let mut buf = Vec::new();
        sample().write_jsonl(&mut buf).unwrap();
        buf.truncate(buf.len() - 10);
        let log = EpisodeLog::read_jsonl(&buf[..]).unwrap();
        assert_eq!(log.steps.len(), 2);
        assert!(!log.is_complete());
    }

    #[test]
    fn garbage_in_the_middle_is_an_error() {
        let text = "{\"type\":\"step\"}\n{}\n";
        assert!(EpisodeLog::read_jsonl(text.as_bytes()).is_err());
    }
}
