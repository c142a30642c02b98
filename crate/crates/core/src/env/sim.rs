use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::log::{EpisodeHeader, EpisodeLog, RunManifest, StepRecord};
use super::measure::{compute_reward, motor_update, TorqueBuffer};
use super::{EnvConfig, EnvError, FlowMode, LatencyMode, Observation, StepInfo, StepResult};
use crate::field::{FlowField, FlowUnits};
use crate::flowsense::FlowSensor;
use crate::lattice::{compute_force, sample_velocity_field, FluidConfig, LatticeError, LatticeState};

/// Sample period the torque noise level refers to, seconds.
const NOISE_REFERENCE_PERIOD: f64 = 1e-3;

#[derive(Debug, Clone)]
struct Episode {
    step: usize,
    tau_start: f64,
    log: EpisodeLog,
}

/// The episodic control environment around one simulated channel. The
/// channel runs continuously: resets do not restart the flow.
#[derive(Debug, Clone)]
pub struct CylinderEnv {
    config: EnvConfig,
    fluid: FluidConfig,
    substeps: usize,
    dt: f64,
    state: Option<LatticeState>,
    omega: f64,
    action: f64,
    torque: TorqueBuffer,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    sensor: Option<FlowSensor>,
    lagged_flow: Option<(FlowField, bool)>,
    baseline: Option<f64>,
    calibration: Vec<f64>,
    episode: Option<Episode>,
    episodes_started: usize,
    agent_steps: u64,
    clipped: u64,
    source: String,
}

impl CylinderEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let (fluid, substeps) = config.resolved_fluid()?;
        let dt = config.control_interval() / substeps as f64;
        let sigma = config.torque_noise * (NOISE_REFERENCE_PERIOD / dt).sqrt();
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma is finite and > 0"));
        let sensor = match config.observation.flow {
            FlowMode::Estimated => Some(FlowSensor::new(
                config.flow_sensor.clone(),
                fluid.inflow_speed,
                config.seed ^ 0x5EED_F10E,
            )?),
            _ => None,
        };
        Ok(CylinderEnv {
            torque: TorqueBuffer::new(config.smoothing_window, dt),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            baseline: config.baseline,
            config,
            fluid,
            substeps,
            dt,
            state: None,
            omega: 0.0,
            action: 0.0,
            noise,
            sensor,
            lagged_flow: None,
            calibration: Vec::new(),
            episode: None,
            episodes_started: 0,
            agent_steps: 0,
            clipped: 0,
            source: String::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// The fluid configuration actually simulated (time step adjusted).
    pub fn fluid(&self) -> &FluidConfig {
        &self.fluid
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn lattice_dt(&self) -> f64 {
        self.dt
    }

    pub fn lattice(&self) -> Option<&LatticeState> {
        self.state.as_ref()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    /// Per-episode mean smoothed torques of the last calibration.
    pub fn calibration(&self) -> &[f64] {
        &self.calibration
    }

    pub fn smoothed_torque(&self) -> f64 {
        self.torque.mean()
    }

    pub fn episode_steps(&self) -> usize {
        self.config.episode_steps()
    }

    pub fn clipped_actions(&self) -> u64 {
        self.clipped
    }

    /// Log of the current (or just finished) episode.
    pub fn episode_log(&self) -> Option<&EpisodeLog> {
        self.episode.as_ref().map(|e| &e.log)
    }

    pub fn tau_start(&self) -> Option<f64> {
        self.episode.as_ref().map(|e| e.tau_start)
    }

    /// Recorded in each episode header.
    pub fn set_source(&mut self, source: impl Into<String>) {
        self.source = source.into();
    }

    /// Advances the channel by one control interval at the given command.
    fn control_step(&mut self, command: f64) -> Result<(), EnvError> {
        let mut state = self.state.take().expect("state initialized before stepping");
        match self.substeps_on(&mut state, command) {
            Ok(()) => {
                self.state = Some(state);
                Ok(())
            }
            Err(e) => {
                self.abort();
                Err(e)
            }
        }
    }

    fn substeps_on(&mut self, state: &mut LatticeState, command: f64) -> Result<(), EnvError> {
        for _ in 0..self.substeps {
            self.omega = motor_update(self.omega, command, self.dt, self.config.motor_time_constant);
            state.step(self.omega)?;
            let mut sample = compute_force(state).torque;
            if let Some(n) = &self.noise {
                sample += n.sample(&mut self.rng);
            }
            let p = self.config.parasitic_torque;
            if p > 0.0 && self.omega != 0.0 {
                sample += self.rng.random_range(-p..=p);
            }
            if !sample.is_finite() {
                return Err(LatticeError::Divergence { step: state.steps() }.into());
            }
            self.torque.push(sample);
        }
        Ok(())
    }

    /// Drops the flow and the episode after a divergence; the next reset
    /// starts from a fresh channel.
    fn abort(&mut self) {
        self.state = None;
        self.episode = None;
        self.omega = 0.0;
        self.torque.clear();
    }

    fn ensure_state(&mut self) -> Result<(), EnvError> {
        if self.state.is_some() {
            return Ok(());
        }
        self.state = Some(LatticeState::new(self.fluid.clone())?);
        self.omega = 0.0;
        self.torque.clear();
        for _ in 0..self.config.warmup_steps() {
            self.control_step(0.0)?;
        }
        Ok(())
    }

    /// Measures τ_nc as the mean smoothed torque over the configured number
    /// of uncontrolled episodes, each preceded by stabilization.
    pub fn calibrate_baseline(&mut self) -> Result<f64, EnvError> {
        self.ensure_state()?;
        self.episode = None;
        self.calibration.clear();
        for _ in 0..self.config.calibration_episodes {
            for _ in 0..self.config.stabilization_steps() {
                self.control_step(0.0)?;
            }
            let mut sum = 0.0;
            for _ in 0..self.episode_steps() {
                self.control_step(0.0)?;
                sum += self.torque.mean();
            }
            self.calibration.push(sum / self.episode_steps() as f64);
        }
        let tau_nc = self.calibration.iter().sum::<f64>() / self.calibration.len() as f64;
        if !(tau_nc > 0.0) {
            return Err(EnvError::Config(format!("calibrated no-control torque {tau_nc} is not positive")));
        }
        self.baseline = Some(tau_nc);
        Ok(tau_nc)
    }

    /// Replaces τ_nc for the episodes that follow.
    pub fn set_baseline(&mut self, tau_nc: f64) -> Result<(), EnvError> {
        if !(tau_nc > 0.0 && tau_nc.is_finite()) {
            return Err(EnvError::Config(format!("no-control torque must be finite and > 0, got {tau_nc}")));
        }
        self.baseline = Some(tau_nc);
        Ok(())
    }

    /// Brings the channel up (warm-up, calibration) without starting an
    /// episode. A clone taken afterwards skips both.
    pub fn prepare(&mut self) -> Result<(), EnvError> {
        self.ensure_state()?;
        if self.baseline.is_none() {
            self.calibrate_baseline()?;
        }
        Ok(())
    }

    /// Lets the flow settle without actuation and starts a new episode.
    pub fn reset(&mut self) -> Result<Observation, EnvError> {
        self.begin_episode()?;
        Ok(self.observe(0)?.0)
    }

    /// [`reset`](Self::reset) without assembling an observation; returns
    /// τ_start. For open-loop runs that ignore observations.
    pub fn reset_blind(&mut self) -> Result<f64, EnvError> {
        self.begin_episode()
    }

    fn begin_episode(&mut self) -> Result<f64, EnvError> {
        self.prepare()?;
        self.episode = None;
        for _ in 0..self.config.stabilization_steps() {
            self.control_step(0.0)?;
        }
        let tau_start = self.torque.mean();
        self.action = 0.0;
        self.lagged_flow = None;
        let header = EpisodeHeader {
            episode: self.episodes_started,
            episode_steps: self.episode_steps(),
            control_rate: self.config.control_rate,
            action_cap: self.config.action_cap,
            task: self.config.task,
            observation: self.config.observation,
            config_hash: self.config.hash(),
            seed: self.config.seed,
            tau_start,
            tau_nc: self.baseline.expect("baseline set above"),
            source: self.source.clone(),
        };
        self.episodes_started += 1;
        self.episode = Some(Episode { step: 0, tau_start, log: EpisodeLog { header, steps: Vec::new() } });
        Ok(tau_start)
    }

    /// Applies one normalized action for one control interval.
    pub fn step(&mut self, action: f64) -> Result<StepResult, EnvError> {
        let (reward, done, mut info) = self.advance(action)?;
        let (observation, flow_fallback) = self.observe(info.step)?;
        info.flow_fallback = flow_fallback;
        Ok(StepResult { observation, reward, done, info })
    }

    /// [`step`](Self::step) without assembling an observation.
    pub fn step_blind(&mut self, action: f64) -> Result<(f64, bool, StepInfo), EnvError> {
        self.advance(action)
    }

    fn advance(&mut self, action: f64) -> Result<(f64, bool, StepInfo), EnvError> {
        if action.is_nan() {
            return Err(EnvError::InvalidAction(action));
        }
        match &self.episode {
            None => return Err(EnvError::ResetRequired),
            Some(e) if e.step >= self.config.episode_steps() => return Err(EnvError::ResetRequired),
            _ => {}
        }
        let clipped = action.abs() > 1.0;
        let a = action.clamp(-1.0, 1.0);
        if clipped {
            self.clipped += 1;
        }
        self.action = a;
        let command = a * self.config.action_cap;
        self.control_step(command)?;
        self.agent_steps += 1;
        let smoothed = self.torque.mean();
        let raw = self.torque.last().unwrap_or(f64::NAN);
        let tau_nc = self.baseline.expect("baseline set at reset");
        let episode = self.episode.as_mut().expect("checked above");
        episode.step += 1;
        let step = episode.step;
        let reward = compute_reward(episode.tau_start, smoothed, self.config.task, tau_nc)?;
        episode.log.steps.push(StepRecord {
            step,
            action: a,
            omega: self.omega,
            torque_raw: raw,
            torque_smoothed: smoothed,
            reward,
        });
        let done = step == self.config.episode_steps();
        let time = self.state.as_ref().map_or(0.0, |s| s.time());
        let info = StepInfo {
            step,
            raw_torque: raw,
            smoothed_torque: smoothed,
            omega: self.omega,
            command,
            clipped,
            flow_fallback: false,
            time,
        };
        Ok((reward, done, info))
    }

    fn current_flow(&mut self) -> Result<(FlowField, bool), EnvError> {
        let (w, h) = self.config.flow_sensor.output;
        let state = self.state.as_ref().expect("state initialized");
        match self.config.observation.flow {
            FlowMode::Omit | FlowMode::Zeroed => Ok((FlowField::zeros(w, h, FlowUnits::MetersPerSecond), false)),
            FlowMode::Truth => Ok((sample_velocity_field(state, self.config.flow_sensor.optics.window, (w, h))?, false)),
            FlowMode::Estimated => {
                let sensor = self.sensor.as_mut().expect("sensor built for estimated flow");
                Ok(sensor.observe(state)?)
            }
        }
    }

    fn observe(&mut self, step: usize) -> Result<(Observation, bool), EnvError> {
        let set = self.config.observation;
        let (flow, fallback) = match set.flow {
            FlowMode::Omit => (None, false),
            FlowMode::Zeroed => (Some(self.current_flow()?.0), false),
            _ => {
                let now = self.current_flow()?;
                let (f, fb) = match self.config.latency {
                    LatencyMode::ZeroLag => now,
                    LatencyMode::OneFrame => self.lagged_flow.replace(now.clone()).unwrap_or(now),
                };
                (Some(f), fb)
            }
        };
        let obs = Observation {
            drag: set.drag.then(|| self.torque.mean()),
            commanded_rate: set.commanded_rate.then_some(self.action),
            rate_feedback: set.rate_feedback.then_some(self.omega / self.config.action_cap),
            time_index: set.time_index.then(|| step as f64 / self.config.episode_steps() as f64),
            flow,
        };
        Ok((obs, fallback))
    }

    /// Run metadata; `wall_time_s` is supplied by whoever measured it.
    pub fn manifest(&self, wall_time_s: f64) -> RunManifest {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            latency: self.config.latency,
            reward_signal: format!("smoothed torque ({} s trailing mean)", self.config.smoothing_window),
            tau_nc: self.baseline,
            episodes: self.episodes_started,
            agent_steps: self.agent_steps,
            virtual_time_s: self.agent_steps as f64 * self.config.control_interval(),
            wall_time_s,
            clipped_actions: self.clipped,
            pacing: None,
            stated_budget_steps: None,
        }
    }
}
