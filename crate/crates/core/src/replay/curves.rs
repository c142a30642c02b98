use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::ReplayError;

/// Running average in %: point `k` is `100·mean(r₁..r_k)`.
pub fn running_average_curve(rewards: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(k, r)| {
            sum += r;
            100.0 * sum / (k + 1) as f64
        })
        .collect()
}

/// End time of each control step, `k / rate` for `k = 1..=n`.
pub fn step_times(n: usize, control_rate: f64) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / control_rate).collect()
}

/// Member curves on a shared time axis with their pointwise mean and
/// min–max envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub times: Vec<f64>,
    pub members: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl CurveSet {
    pub fn empty() -> Self {
        CurveSet { times: Vec::new(), members: Vec::new(), mean: Vec::new(), min: Vec::new(), max: Vec::new() }
    }

    pub fn new(times: Vec<f64>, members: Vec<Vec<f64>>) -> Result<Self, ReplayError> {
        if let Some(m) = members.iter().find(|m| m.len() != times.len()) {
            return Err(ReplayError::ConfigMismatch(format!(
                "curve of {} points on a {}-point time axis",
                m.len(),
                times.len()
            )));
        }
        if members.is_empty() {
            return Ok(CurveSet { times, ..Self::empty() });
        }
        let n = members.len() as f64;
        let mut mean = vec![0.0; times.len()];
        let mut min = vec![f64::INFINITY; times.len()];
        let mut max = vec![f64::NEG_INFINITY; times.len()];
        for m in &members {
            for (k, v) in m.iter().enumerate() {
                mean[k] += v / n;
                min[k] = min[k].min(*v);
                max[k] = max[k].max(*v);
            }
        }
        Ok(CurveSet { times, members, mean, min, max })
    }

    /// Running-average curves of several reward sequences.
    pub fn from_rewards(runs: &[Vec<f64>], control_rate: f64) -> Result<Self, ReplayError> {
        let n = runs.first().map_or(0, Vec::len);
        CurveSet::new(step_times(n, control_rate), runs.iter().map(|r| running_average_curve(r)).collect())
    }

    /// Last point of each member: the episode-mean drag variation in %.
    pub fn final_scores(&self) -> Vec<f64> {
        self.members.iter().filter_map(|m| m.last().copied()).collect()
    }

    /// `t_s,mean,min,max`; only the header when there are no members.
    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_s", "mean", "min", "max"]).map_err(io::Error::other)?;
        if !self.members.is_empty() {
            for k in 0..self.times.len() {
                out.write_record([
                    self.times[k].to_string(),
                    self.mean[k].to_string(),
                    self.min[k].to_string(),
                    self.max[k].to_string(),
                ])
                .map_err(io::Error::other)?;
            }
        }
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_mean_examples() {
        assert_eq!(running_average_curve(&[0.1, 0.3]), vec![10.0, 20.0]);
        assert!(running_average_curve(&[0.28; 50]).iter().all(|v| (v - 28.0).abs() < 1e-12));
    }

    #[test]
    fn empty_set_writes_header_only() {
        let mut buf = Vec::new();
        CurveSet::empty().write_csv(&mut buf).unwrap();
        assert_eq!(buf, b"t_s,mean,min,max\n");
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(CurveSet::new(vec![1.0, 2.0], vec![vec![1.0]]).is_err());
    }
}
