use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::OpenLoopError;
use crate::env::{CylinderEnv, EnvConfig, EnvError};
use crate::lattice::LatticeError;

/// Control updates required per forcing period.
pub const MIN_UPDATES_PER_PERIOD: f64 = 10.0;

/// `ω(t) = A sin(2πft)`, phase zero at the first step of the episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidPolicy {
    /// rad/s
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
}

impl SinusoidPolicy {
    pub fn new(amplitude: f64, frequency: f64) -> Self {
        SinusoidPolicy { amplitude, frequency }
    }

    /// Checks `0 ≤ A ≤ Ā` and `0 ≤ f ≤ rate/10`.
    pub fn validate(&self, action_cap: f64, control_rate: f64) -> Result<(), OpenLoopError> {
        if !(0.0..=action_cap).contains(&self.amplitude) {
            return Err(OpenLoopError::Policy(format!(
                "amplitude {} rad/s outside [0, {action_cap}]",
                self.amplitude
            )));
        }
        let f_max = control_rate / MIN_UPDATES_PER_PERIOD;
        if !(0.0..=f_max + 1e-12).contains(&self.frequency) {
            return Err(OpenLoopError::Policy(format!(
                "frequency {} Hz outside [0, {f_max}] (at least {MIN_UPDATES_PER_PERIOD} updates per period at {control_rate} Hz)",
                self.frequency
            )));
        }
        Ok(())
    }

    /// Normalized action for the 0-based control step `k`, sampled at `k / rate`.
    pub fn action(&self, k: usize, control_rate: f64, action_cap: f64) -> f64 {
        let t = k as f64 / control_rate;
        self.amplitude / action_cap * (TAU * self.frequency * t).sin()
    }

    /// All actions of one episode.
    pub fn actions(&self, config: &EnvConfig) -> Vec<f64> {
        (0..config.episode_steps()).map(|k| self.action(k, config.control_rate, config.action_cap)).collect()
    }
}

/// Statistics of the episode-mean drag variation over repetitions, in %
/// of the no-control torque, signed so that larger is better for the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyScore {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub reps: usize,
    pub values: Vec<f64>,
    /// Repetitions lost to solver divergence: (index, message).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<(usize, String)>,
}

impl PolicyScore {
    pub fn from_values(values: Vec<f64>, failed: Vec<(usize, String)>) -> Result<Self, OpenLoopError> {
        if values.is_empty() {
            return Err(OpenLoopError::AllRepsFailed(failed.len()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(PolicyScore { mean, min, max, reps: values.len(), values, failed })
    }

    /// Sample standard deviation; zero for one repetition.
    pub fn std_dev(&self) -> f64 {
        if self.reps < 2 {
            return 0.0;
        }
        let ss: f64 = self.values.iter().map(|v| (v - self.mean).powi(2)).sum();
        (ss / (self.reps - 1) as f64).sqrt()
    }

    pub fn std_error(&self) -> f64 {
        self.std_dev() / (self.reps as f64).sqrt()
    }
}

/// Episode score in %: `100 · mean(rewards)`, which by telescoping equals
/// `100·s·(mean τ̂ − τ_start)/τ_nc`.
pub fn episode_score(rewards: &[f64]) -> f64 {
    100.0 * rewards.iter().sum::<f64>() / rewards.len() as f64
}

/// Runs one episode of fixed actions without assembling observations and
/// returns the rewards.
pub fn run_open_loop(env: &mut CylinderEnv, actions: &[f64]) -> Result<Vec<f64>, EnvError> {
    env.reset_blind()?;
    let mut rewards = Vec::with_capacity(actions.len());
    for &a in actions {
        rewards.push(env.step_blind(a)?.0);
    }
    Ok(rewards)
}

/// A channel brought up once (warm-up and τ_nc calibration), from which
/// every evaluation starts by cloning. Evaluations are therefore
/// independent of each other and of the order they run in.
#[derive(Debug, Clone)]
pub struct Evaluator {
    prototype: CylinderEnv,
}

impl Evaluator {
    pub fn new(config: EnvConfig) -> Result<Self, OpenLoopError> {
        let mut prototype = CylinderEnv::new(config)?;
        prototype.prepare()?;
        Ok(Evaluator { prototype })
    }

    pub fn from_env(mut prototype: CylinderEnv) -> Result<Self, OpenLoopError> {
        prototype.prepare()?;
        Ok(Evaluator { prototype })
    }

    pub fn config(&self) -> &EnvConfig {
        self.prototype.config()
    }

    pub fn baseline(&self) -> f64 {
        self.prototype.baseline().expect("prepared")
    }

    pub fn prototype(&self) -> &CylinderEnv {
        &self.prototype
    }

    /// `reps` consecutive episodes of the policy on a copy of the prepared
    /// channel. A repetition that diverges is recorded as failed and the
    /// channel restarts cold for the next one.
    pub fn eval_sinusoid(&self, policy: SinusoidPolicy, reps: usize) -> Result<PolicyScore, OpenLoopError> {
        let cfg = self.prototype.config();
        policy.validate(cfg.action_cap, cfg.control_rate)?;
        if reps == 0 {
            return Err(OpenLoopError::Policy("at least one repetition required".into()));
        }
        let actions = policy.actions(cfg);
        let mut env = self.prototype.clone();
        let mut values = Vec::with_capacity(reps);
        let mut failed = Vec::new();
        for rep in 0..reps {
            match run_open_loop(&mut env, &actions) {
                Ok(rewards) => values.push(episode_score(&rewards)),
                Err(e @ EnvError::Lattice(LatticeError::Divergence { .. })) => failed.push((rep, e.to_string())),
                Err(e) => return Err(e.into()),
            }
        }
        PolicyScore::from_values(values, failed)
    }
}

/// One-shot evaluation: prepares a channel for `config` and scores the policy.
pub fn eval_sinusoid(policy: SinusoidPolicy, reps: usize, config: &EnvConfig) -> Result<PolicyScore, OpenLoopError> {
    policy.validate(config.action_cap, config.control_rate)?;
    Evaluator::new(config.clone())?.eval_sinusoid(policy, reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_starts_at_zero() {
        let p = SinusoidPolicy::new(15.7, 1.0);
        assert_eq!(p.action(0, 30.0, 15.7), 0.0);
        // quarter period at 1 Hz is 7.5 steps; step 15 is half a period
        assert!((p.action(15, 30.0, 15.7)).abs() < 1e-12);
        let q = SinusoidPolicy::new(7.85, 0.25);
        assert!((q.action(30, 30.0, 15.7) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn frequency_bound() {
        assert!(SinusoidPolicy::new(15.7, 3.0).validate(15.7, 30.0).is_ok());
        assert!(SinusoidPolicy::new(15.7, 3.1).validate(15.7, 30.0).is_err());
        assert!(SinusoidPolicy::new(15.7, 16.0).validate(15.7, 30.0).is_err());
        assert!(SinusoidPolicy::new(16.0, 1.0).validate(15.7, 30.0).is_err());
        assert!(SinusoidPolicy::new(-1.0, 1.0).validate(15.7, 30.0).is_err());
    }

    #[test]
    fn score_statistics() {
        let s = PolicyScore::from_values(vec![1.0, 2.0, 6.0], vec![]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.reps), (3.0, 1.0, 6.0, 3));
        assert!((s.std_dev() - 7.0f64.sqrt()).abs() < 1e-12);
        assert!(PolicyScore::from_values(vec![], vec![(0, "x".into())]).is_err());
    }
}
