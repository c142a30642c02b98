use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EnvError;
use crate::flowsense::FlowSensorConfig;
use crate::lattice::{Discretization, FluidConfig};

/// Upper bound on the shedding frequency used to size the control rate, Hz.
pub const SHEDDING_FREQUENCY_BOUND: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Maximize,
    #[default]
    Minimize,
}

impl Task {
    /// Reward sign.
    pub fn sign(self) -> f64 {
        match self {
            Task::Maximize => 1.0,
            Task::Minimize => -1.0,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" | "maximize" => Ok(Task::Maximize),
            "min" | "minimize" => Ok(Task::Minimize),
            _ => Err(EnvError::Config(format!("unknown task {s:?} (expected max or min)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    #[default]
    Omit,
    /// A 16×16 field of zeros.
    Zeroed,
    /// Direct samples of the simulated velocity.
    Truth,
    /// Synthetic images through the optical-flow estimator.
    Estimated,
}

/// Which observation fields are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationSet {
    pub drag: bool,
    pub commanded_rate: bool,
    pub rate_feedback: bool,
    pub time_index: bool,
    pub flow: FlowMode,
}

impl Default for ObservationSet {
    fn default() -> Self {
        Preset::Full.observation_set()
    }
}

impl ObservationSet {
    pub fn field_count(&self) -> usize {
        [self.drag, self.commanded_rate, self.rate_feedback, self.time_index, self.flow != FlowMode::Omit]
            .iter()
            .filter(|b| **b)
            .count()
    }
}

/// Named observation sets of the training setups and ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Drag, both rates and the estimated flow.
    Full,
    /// Drag, both rates and the episode time index.
    Noflow,
    DragOnly,
    /// `Full` with the flow replaced by zeros.
    ZeroedFlow,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Full, Preset::Noflow, Preset::DragOnly, Preset::ZeroedFlow];

    pub fn observation_set(self) -> ObservationSet {
        let rates = ObservationSet {
            drag: true,
            commanded_rate: true,
            rate_feedback: true,
            time_index: false,
            flow: FlowMode::Omit,
        };
        match self {
            Preset::Full => ObservationSet { flow: FlowMode::Estimated, ..rates },
            Preset::Noflow => ObservationSet { time_index: true, ..rates },
            Preset::DragOnly => ObservationSet { drag: true, ..ObservationSet::none() },
            Preset::ZeroedFlow => ObservationSet { flow: FlowMode::Zeroed, ..rates },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Full => "full",
            Preset::Noflow => "noflow",
            Preset::DragOnly => "drag_only",
            Preset::ZeroedFlow => "zeroed_flow",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| EnvError::Config(format!("unknown preset {s:?}")))
    }
}

impl ObservationSet {
    pub fn none() -> Self {
        ObservationSet { drag: false, commanded_rate: false, rate_feedback: false, time_index: false, flow: FlowMode::Omit }
    }
}

/// When the flow field handed to the agent was captured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatencyMode {
    /// The flow of the current state.
    #[default]
    ZeroLag,
    /// The flow captured one control step earlier, as a camera pipeline
    /// running alongside the solver would deliver it.
    OneFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub task: Task,
    /// Hz.
    pub control_rate: f64,
    /// Seconds.
    pub episode_duration: f64,
    /// Uncontrolled flow before each episode, seconds.
    pub stabilization_duration: f64,
    /// Uncontrolled flow once after a cold start, seconds, so that the wake
    /// is shedding before the first stabilization period.
    pub warmup_duration: f64,
    /// Ā, rad/s.
    pub action_cap: f64,
    /// First-order motor lag, seconds.
    pub motor_time_constant: f64,
    /// Torque sensor noise, mN·m standard deviation per 1 kHz sample.
    pub torque_noise: f64,
    /// Half-width of the uniform parasitic torque added while the cylinder
    /// turns, mN·m.
    pub parasitic_torque: f64,
    /// Trailing averaging window of the torque signal, seconds.
    pub smoothing_window: f64,
    pub observation: ObservationSet,
    pub latency: LatencyMode,
    /// No-control torque τ_nc, mN·m; calibrated when absent.
    pub baseline: Option<f64>,
    /// No-control episodes averaged by the calibration.
    pub calibration_episodes: usize,
    /// Lattice steps per control step; derived from the Mach target when
    /// absent.
    pub substeps: Option<usize>,
    pub fluid: FluidConfig,
    pub flow_sensor: FlowSensorConfig,
    /// Noise and sensor seed.
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl EnvConfig {
    /// Desk profile: 20 s episodes after 10 s of stabilization.
    pub fn desk() -> Self {
        EnvConfig {
            task: Task::Minimize,
            control_rate: 30.0,
            episode_duration: 20.0,
            stabilization_duration: 10.0,
            warmup_duration: 20.0,
            action_cap: 15.7,
            motor_time_constant: 0.05,
            torque_noise: 0.15,
            parasitic_torque: 0.0,
            smoothing_window: 1.0,
            observation: ObservationSet::default(),
            latency: LatencyMode::ZeroLag,
            baseline: None,
            calibration_episodes: 10,
            substeps: None,
            fluid: FluidConfig::desk(),
            flow_sensor: FlowSensorConfig::default(),
            seed: 0,
        }
    }

    /// Full protocol timing: 60 s episodes (1800 steps) after 60 s of
    /// stabilization. The fluid stays at the desk regime.
    pub fn paper() -> Self {
        EnvConfig { episode_duration: 60.0, stabilization_duration: 60.0, ..Self::desk() }
    }

    /// Same timing on the reduced-resolution channel.
    pub fn coarse(self) -> Self {
        EnvConfig { fluid: FluidConfig::desk_coarse(), ..self }
    }

    pub fn with_preset(self, preset: Preset) -> Self {
        EnvConfig { observation: preset.observation_set(), ..self }
    }

    pub fn control_interval(&self) -> f64 {
        1.0 / self.control_rate
    }

    fn whole_steps(&self, name: &str, seconds: f64) -> Result<usize, EnvError> {
        let n = seconds * self.control_rate;
        if !(n >= 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(EnvError::Config(format!("{name} {seconds} s is not a whole number of control steps")));
        }
        Ok(n.round() as usize)
    }

    pub fn episode_steps(&self) -> usize {
        (self.episode_duration * self.control_rate).round() as usize
    }

    pub fn stabilization_steps(&self) -> usize {
        (self.stabilization_duration * self.control_rate).round() as usize
    }

    pub fn warmup_steps(&self) -> usize {
        (self.warmup_duration * self.control_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if !(self.control_rate >= 10.0 * SHEDDING_FREQUENCY_BOUND) {
            return bad(format!(
                "control rate {} Hz is below ten times the shedding bound ({} Hz)",
                self.control_rate,
                10.0 * SHEDDING_FREQUENCY_BOUND
            ));
        }
        if self.whole_steps("episode duration", self.episode_duration)? == 0 {
            return bad("episode must last at least one control step".into());
        }
        self.whole_steps("stabilization duration", self.stabilization_duration)?;
        self.whole_steps("warm-up duration", self.warmup_duration)?;
        if !(self.action_cap > 0.0) {
            return bad(format!("action cap must be > 0, got {}", self.action_cap));
        }
        if self.action_cap > self.fluid.max_rotation_rate {
            return bad(format!(
                "action cap {} rad/s exceeds the solver's rotation limit {} rad/s",
                self.action_cap, self.fluid.max_rotation_rate
            ));
        }
        if !(self.motor_time_constant >= 0.0) || !(self.torque_noise >= 0.0) || !(self.parasitic_torque >= 0.0) {
            return bad("motor time constant and noise levels must be >= 0".into());
        }
        if !(self.smoothing_window > 0.0) {
            return bad(format!("smoothing window must be > 0, got {}", self.smoothing_window));
        }
        if let Some(b) = self.baseline {
            if !(b > 0.0) {
                return bad(format!("no-control baseline must be > 0, got {b}"));
            }
        } else if self.calibration_episodes == 0 {
            return bad("no baseline given and zero calibration episodes".into());
        }
        if self.observation.field_count() == 0 {
            return bad("observation set is empty".into());
        }
        if self.substeps == Some(0) {
            return bad("substeps must be >= 1".into());
        }
        Ok(())
    }

    /// Fluid configuration with the time step adjusted so that a whole
    /// number of lattice steps spans one control interval, and that number.
    pub fn resolved_fluid(&self) -> Result<(FluidConfig, usize), EnvError> {
        let interval = self.control_interval();
        let substeps = match self.substeps {
            Some(n) => n,
            None => {
                let dt = Discretization::new(&self.fluid)?.units.dt;
                ((interval / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
            }
        };
        let fluid = FluidConfig { time_step: Some(interval / substeps as f64), ..self.fluid.clone() };
        Discretization::new(&fluid)?;
        Ok((fluid, substeps))
    }

    /// SHA-256 of the JSON serialization, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_have_expected_step_counts() {
        assert_eq!(EnvConfig::paper().episode_steps(), 1800);
        assert_eq!(EnvConfig::paper().stabilization_steps(), 1800);
        assert_eq!(EnvConfig::desk().episode_steps(), 600);
    }

    #[test]
    fn fractional_episode_is_rejected() {
        let cfg = EnvConfig { episode_duration: 1.01, ..EnvConfig::desk() };
        assert!(matches!(cfg.validate(), Err(EnvError::Config(_))));
    }

    #[test]
    fn slow_control_rate_is_rejected() {
        let cfg = EnvConfig { control_rate: 10.0, episode_duration: 1.0, ..EnvConfig::desk() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn substeps_tile_the_control_interval() {
        let (fluid, n) = EnvConfig::desk().coarse().resolved_fluid().unwrap();
        let dt = fluid.time_step.unwrap();
        assert!((n as f64 * dt - 1.0 / 30.0).abs() < 1e-15);
        let nominal = Discretization::new(&FluidConfig::desk_coarse()).unwrap().units.dt;
        assert!(dt <= nominal && dt > nominal * (n as f64 - 1.0) / n as f64);
    }

    #[test]
    fn presets_parse_and_differ() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!(Preset::DragOnly.observation_set().field_count(), 1);
        assert_eq!(Preset::ZeroedFlow.observation_set().flow, FlowMode::Zeroed);
        assert!(Preset::Noflow.observation_set().time_index);
    }

    #[test]
    fn hash_tracks_content() {
        let a = EnvConfig::desk();
        assert_eq!(a.hash(), EnvConfig::desk().hash());
        assert_ne!(a.hash(), EnvConfig { seed: 1, ..a.clone() }.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
