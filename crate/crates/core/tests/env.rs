use cyldrag_core::env::*;
use proptest::prelude::*;

/// Short protocol on the coarse channel with a fixed baseline.
fn quick(episode_s: f64, stabilization_s: f64) -> EnvConfig {
    EnvConfig {
        episode_duration: episode_s,
        stabilization_duration: stabilization_s,
        warmup_duration: 0.0,
        baseline: Some(100.0),
        observation: Preset::Noflow.observation_set(),
        ..EnvConfig::desk().coarse()
    }
}

fn run(cfg: &EnvConfig, actions: &[f64]) -> (Observation, Vec<StepResult>) {
    let mut env = CylinderEnv::new(cfg.clone()).unwrap();
    let first = env.reset().unwrap();
    let results = actions.iter().map(|a| env.step(*a).unwrap()).collect();
    (first, results)
}

#[test]
fn paper_profile_episode_has_1800_steps() {
    let cfg = EnvConfig { warmup_duration: 0.0, baseline: Some(100.0), ..EnvConfig::paper().coarse() }
        .with_preset(Preset::Noflow);
    let mut env = CylinderEnv::new(cfg).unwrap();
    let first = env.reset().unwrap();
    assert_eq!(first.time_index, Some(0.0));
    assert_eq!(first.commanded_rate, Some(0.0));
    let mut count = 0;
    loop {
        let r = env.step(0.0).unwrap();
        count += 1;
        if r.info.step == 900 {
            assert_eq!(r.observation.time_index, Some(0.5));
        }
        assert_eq!(r.done, count == 1800);
        if r.done {
            break;
        }
    }
    assert_eq!(count, 1800);
    assert_eq!(env.step(0.0).unwrap_err(), EnvError::ResetRequired);
    assert!(env.episode_log().unwrap().is_complete());
}

#[test]
fn step_before_reset_is_refused() {
    let mut env = CylinderEnv::new(quick(1.0, 0.1)).unwrap();
    assert_eq!(env.step(0.5).unwrap_err(), EnvError::ResetRequired);
}

#[test]
fn full_action_commands_the_cap() {
    let (_, r) = run(&quick(1.0, 0.1), &[1.0, -1.0]);
    assert_eq!(r[0].info.command, 15.7);
    assert_eq!(r[1].info.command, -15.7);
    assert!(r[0].info.omega > 0.0 && r[0].info.omega < 15.7);
}

#[test]
fn motor_feedback_after_one_interval() {
    let cfg = EnvConfig { torque_noise: 0.0, ..quick(1.0, 0.1) };
    let (_, r) = run(&cfg, &[1.0]);
    let expected = 1.0 - (-1.0 / 30.0 / 0.05f64).exp();
    assert!((r[0].observation.rate_feedback.unwrap() - expected).abs() < 1e-12);
}

#[test]
fn nan_action_is_an_error() {
    let mut env = CylinderEnv::new(quick(1.0, 0.1)).unwrap();
    env.reset().unwrap();
    assert!(matches!(env.step(f64::NAN), Err(EnvError::InvalidAction(_))));
}

#[test]
fn reward_telescopes_to_mean_smoothed_torque() {
    let cfg = EnvConfig { task: Task::Maximize, ..quick(2.0, 0.5) };
    let actions: Vec<f64> = (0..60).map(|k| (k as f64 * 0.3).sin()).collect();
    let mut env = CylinderEnv::new(cfg).unwrap();
    env.reset().unwrap();
    for a in &actions {
        env.step(*a).unwrap();
    }
    let log = env.episode_log().unwrap();
    let n = log.steps.len() as f64;
    let mean_reward = log.steps.iter().map(|s| s.reward).sum::<f64>() / n;
    let mean_tau = log.steps.iter().map(|s| s.torque_smoothed).sum::<f64>() / n;
    let expected = (mean_tau - log.header.tau_start) / log.header.tau_nc;
    assert!((mean_reward - expected).abs() < 1e-12, "{mean_reward} vs {expected}");
}

#[test]
fn resets_after_identical_histories_agree() {
    let cfg = quick(0.5, 0.5);
    let mut a = CylinderEnv::new(cfg.clone()).unwrap();
    let mut b = CylinderEnv::new(cfg).unwrap();
    for env in [&mut a, &mut b] {
        env.reset().unwrap();
        for k in 0..15 {
            env.step(if k % 2 == 0 { 0.7 } else { -0.2 }).unwrap();
        }
        env.reset().unwrap();
    }
    assert_eq!(a.tau_start(), b.tau_start());
    assert_eq!(a.tau_start().unwrap().to_bits(), b.tau_start().unwrap().to_bits());
}

#[test]
fn zeroed_flow_is_sixteen_by_sixteen_zeros() {
    let cfg = EnvConfig { observation: Preset::ZeroedFlow.observation_set(), ..quick(1.0, 0.1) };
    let (first, r) = run(&cfg, &[0.5]);
    for obs in [&first, &r[0].observation] {
        let f = obs.flow.as_ref().unwrap();
        assert_eq!((f.width, f.height), (16, 16));
        assert!(f.u.iter().chain(&f.v).all(|x| *x == 0.0));
    }
}

#[test]
fn drag_only_has_exactly_one_field() {
    let cfg = EnvConfig { observation: Preset::DragOnly.observation_set(), ..quick(1.0, 0.1) };
    let (first, r) = run(&cfg, &[0.2]);
    assert_eq!(first.fields(), vec!["drag"]);
    assert_eq!(r[0].observation.fields(), vec!["drag"]);
}

#[test]
fn one_frame_latency_delays_the_flow_by_one_step() {
    let base = EnvConfig {
        observation: ObservationSet { flow: FlowMode::Truth, ..Preset::Noflow.observation_set() },
        ..quick(1.0, 0.2)
    };
    let lagged = EnvConfig { latency: LatencyMode::OneFrame, ..base.clone() };
    let actions = [1.0, -0.5, 0.25, 0.8];
    let (f0, now) = run(&base, &actions);
    let (g0, late) = run(&lagged, &actions);
    assert_eq!(g0.flow, f0.flow);
    assert_eq!(late[0].observation.flow, f0.flow);
    for k in 1..actions.len() {
        assert_eq!(late[k].observation.flow, now[k - 1].observation.flow);
    }
}

#[test]
fn estimated_flow_follows_the_wake() {
    let cfg = EnvConfig {
        observation: Preset::Full.observation_set(),
        warmup_duration: 10.0,
        ..quick(1.0, 0.2)
    };
    let mut env = CylinderEnv::new(cfg).unwrap();
    let obs = env.reset().unwrap();
    let est = obs.flow.unwrap();
    let window = env.config().flow_sensor.optics.window;
    let truth = cyldrag_core::lattice::sample_velocity_field(env.lattice().unwrap(), window, (128, 128))
        .unwrap()
        .box_resample(16, 16);
    assert!(est.cosine_similarity(&truth) > 0.9);
    let r = env.step(0.0).unwrap();
    assert!(!r.info.flow_fallback);
}

#[test]
fn uncontrolled_episode_has_near_zero_reward() {
    let cfg = EnvConfig { torque_noise: 0.0, warmup_duration: 15.0, ..quick(5.0, 2.0) };
    let mut env = CylinderEnv::new(cfg).unwrap();
    env.reset().unwrap();
    let tau_start = env.tau_start().unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..150 {
        let r = env.step(0.0).unwrap();
        worst = worst.max(r.reward.abs());
    }
    // Smoothing over one second leaves part of the shedding ripple.
    eprintln!("worst |r| {worst}, τ_start {tau_start}");
    assert!(worst < 0.05, "worst |r| {worst}, τ_start {tau_start}");
}

#[test]
fn calibration_averages_uncontrolled_episodes() {
    let cfg = EnvConfig { baseline: None, calibration_episodes: 2, ..quick(0.5, 0.2) };
    let mut env = CylinderEnv::new(cfg).unwrap();
    env.reset().unwrap();
    let cal = env.calibration().to_vec();
    assert_eq!(cal.len(), 2);
    let tau_nc = env.baseline().unwrap();
    assert!((tau_nc - (cal[0] + cal[1]) / 2.0).abs() < 1e-12 && tau_nc > 0.0);
    assert_eq!(env.episode_log().unwrap().header.tau_nc, tau_nc);
}

#[test]
fn sinusoid_over_one_period_averages_to_offset() {
    let n = 1000;
    let samples: Vec<f64> =
        (0..n).map(|k| 82.64 + 6.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.3).sin()).collect();
    assert!((smooth_torque(&samples) - 82.64).abs() < 0.01 * 82.64);
}

#[test]
fn config_round_trips_through_json() {
    let cfg = EnvConfig::paper().with_preset(Preset::ZeroedFlow);
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let back: EnvConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    let partial: EnvConfig = serde_json::from_str(r#"{"task": "maximize", "episode_duration": 30.0}"#).unwrap();
    assert_eq!(partial.task, Task::Maximize);
    assert_eq!(partial.control_rate, 30.0);
}

#[test]
fn manifest_counts_agent_steps() {
    let mut env = CylinderEnv::new(quick(0.5, 0.1)).unwrap();
    env.reset().unwrap();
    for _ in 0..15 {
        env.step(2.0).unwrap();
    }
    let m = env.manifest(1.5);
    assert_eq!(m.agent_steps, 15);
    assert_eq!(m.clipped_actions, 15);
    assert!((m.virtual_time_s - 0.5).abs() < 1e-12);
    assert_eq!(m.config_hash, env.config().hash());
}

fn observation_set() -> impl Strategy<Value = ObservationSet> {
    (
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        prop_oneof![Just(FlowMode::Omit), Just(FlowMode::Zeroed), Just(FlowMode::Truth)],
    )
        .prop_map(|(drag, commanded_rate, rate_feedback, time_index, flow)| ObservationSet {
            drag,
            commanded_rate,
            rate_feedback,
            time_index,
            flow,
        })
        .prop_filter("at least one field", |s| s.field_count() > 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn clipped_actions_match_their_sign(actions in prop::collection::vec(prop_oneof![-5.0f64..-1.0, 1.0f64..5.0], 1..5)) {
        let cfg = quick(1.0, 0.1);
        let signs: Vec<f64> = actions.iter().map(|a| a.signum()).collect();
        let (_, a) = run(&cfg, &actions);
        let (_, b) = run(&cfg, &signs);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.observation, &y.observation);
            prop_assert_eq!(x.reward.to_bits(), y.reward.to_bits());
            prop_assert_eq!(x.info.omega.to_bits(), y.info.omega.to_bits());
        }
    }

    #[test]
    fn observations_contain_exactly_the_enabled_fields(set in observation_set(), action in -1.0f64..1.0) {
        let cfg = EnvConfig { observation: set, ..quick(1.0, 0.1) };
        let (first, r) = run(&cfg, &[action]);
        for obs in [first, r[0].observation.clone()] {
            prop_assert_eq!(obs.fields().len(), set.field_count());
            prop_assert_eq!(obs.drag.is_some(), set.drag);
            prop_assert_eq!(obs.commanded_rate.is_some(), set.commanded_rate);
            prop_assert_eq!(obs.rate_feedback.is_some(), set.rate_feedback);
            prop_assert_eq!(obs.time_index.is_some(), set.time_index);
            prop_assert_eq!(obs.flow.is_some(), set.flow != FlowMode::Omit);
            let text = serde_json::to_string(&obs).unwrap();
            let back: Observation = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &obs);
            if set.flow == FlowMode::Omit {
                prop_assert!(!text.contains("flow"));
            }
        }
    }

    #[test]
    fn noise_free_runs_are_bitwise_identical(seed in any::<u64>(), actions in prop::collection::vec(-1.0f64..1.0, 1..6)) {
        let cfg = EnvConfig { torque_noise: 0.0, seed, ..quick(1.0, 0.1) };
        let (fa, a) = run(&cfg, &actions);
        let (fb, b) = run(&cfg, &actions);
        prop_assert_eq!(fa, fb);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.reward.to_bits(), y.reward.to_bits());
            prop_assert_eq!(x.info.raw_torque.to_bits(), y.info.raw_torque.to_bits());
            prop_assert_eq!(&x.observation, &y.observation);
        }
    }
}
