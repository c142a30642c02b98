use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ActionTrajectory, CurveSet, ReplayError};
use crate::env::{CylinderEnv, EnvConfig, EpisodeLog};
use crate::openloop::run_open_loop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Every repetition rebuilds the channel with the configured seed and
    /// replays the same history, so it reproduces the recording bit for bit.
    Same,
    /// Every repetition gets its own flow and noise seed. The channel goes
    /// through the same warm-up and calibration as the recording, so the
    /// flow has the same age, but rewards use τ_nc from the trajectory.
    Fresh,
}

impl std::str::FromStr for SeedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "same" => Ok(SeedPolicy::Same),
            "fresh" => Ok(SeedPolicy::Fresh),
            _ => Err(format!("unknown seed policy {s:?} (same|fresh)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    /// Seed each repetition ran with.
    pub seeds: Vec<u64>,
    pub logs: Vec<EpisodeLog>,
    pub curves: CurveSet,
}

/// Seeds for `reps` fresh repetitions, derived from the configured seed.
pub fn fresh_seeds(base: u64, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base ^ 0xF8E5_4EED_0000_0000);
    (0..reps).map(|_| rng.next_u64()).collect()
}

/// Refuses to replay under a different rate, duration, cap or task.
pub fn check_compatible(traj: &ActionTrajectory, config: &EnvConfig) -> Result<(), ReplayError> {
    let mut diffs = Vec::new();
    if traj.control_rate != config.control_rate {
        diffs.push(format!("control rate {} Hz vs {} Hz", traj.control_rate, config.control_rate));
    }
    if traj.episode_steps != config.episode_steps() {
        diffs.push(format!("episode of {} steps vs {}", traj.episode_steps, config.episode_steps()));
    }
    if traj.action_cap != config.action_cap {
        diffs.push(format!("action cap {} vs {}", traj.action_cap, config.action_cap));
    }
    if traj.task != config.task {
        diffs.push(format!("task {:?} vs {:?}", traj.task, config.task));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(ReplayError::ConfigMismatch(diffs.join("; ")))
    }
}

/// Replays `traj` open loop `reps` times.
pub fn replay(
    traj: &ActionTrajectory,
    reps: usize,
    config: &EnvConfig,
    seeds: SeedPolicy,
) -> Result<ReplayOutcome, ReplayError> {
    replay_after(traj, &[], reps, config, seeds)
}

/// Replays `traj` after running the episodes in `lead_in` (their actions,
/// in order) on the same channel, which reproduces a trajectory recorded
/// later in a session.
pub fn replay_after(
    traj: &ActionTrajectory,
    lead_in: &[ActionTrajectory],
    reps: usize,
    config: &EnvConfig,
    seeds: SeedPolicy,
) -> Result<ReplayOutcome, ReplayError> {
    traj.validate()?;
    check_compatible(traj, config)?;
    for t in lead_in {
        t.validate()?;
        check_compatible(t, config)?;
    }
    let seed_list = match seeds {
        SeedPolicy::Same => vec![config.seed; reps],
        SeedPolicy::Fresh => fresh_seeds(config.seed, reps),
    };
    let logs: Vec<Result<EpisodeLog, ReplayError>> = seed_list
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            if seeds == SeedPolicy::Fresh {
                cfg.seed = seed;
                cfg.fluid.seed = seed;
            }
            let mut env = CylinderEnv::new(cfg)?;
            if seeds == SeedPolicy::Fresh {
                env.prepare()?;
                env.set_baseline(traj.tau_nc)?;
            }
            env.set_source(format!("replay of {}#{}", traj.source.session, traj.source.episode));
            for t in lead_in {
                run_open_loop(&mut env, &t.actions)?;
            }
            run_open_loop(&mut env, &traj.actions)?;
            Ok(env.episode_log().expect("episode just ran").clone())
        })
        .collect();
    let logs = logs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rewards: Vec<Vec<f64>> = logs.iter().map(EpisodeLog::rewards).collect();
    let curves = if rewards.is_empty() { CurveSet::empty() } else { CurveSet::from_rewards(&rewards, config.control_rate)? };
    Ok(ReplayOutcome { seeds: seed_list, logs, curves })
}
