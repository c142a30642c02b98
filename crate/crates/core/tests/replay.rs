use cyldrag_core::env::*;
use cyldrag_core::export;
use cyldrag_core::lattice::{FluidConfig, LatticeState};
use cyldrag_core::openloop::{episode_score, Evaluator, SinusoidPolicy};
use cyldrag_core::replay::*;
use proptest::prelude::*;

fn quick(episode_s: f64, noise: f64) -> EnvConfig {
    EnvConfig {
        episode_duration: episode_s,
        stabilization_duration: 0.5,
        warmup_duration: 1.0,
        baseline: Some(100.0),
        torque_noise: noise,
        observation: Preset::Noflow.observation_set(),
        ..EnvConfig::desk().coarse()
    }
}

fn wiggle(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|k| (0.37 * k as f64 + phase).sin() * 0.9).collect()
}

/// Drives `episodes` action sequences through the observing interface and
/// returns the logs.
fn session(cfg: &EnvConfig, episodes: &[Vec<f64>]) -> Vec<EpisodeLog> {
    let mut env = CylinderEnv::new(cfg.clone()).unwrap();
    env.set_source("test-session");
    episodes
        .iter()
        .map(|actions| {
            env.reset().unwrap();
            for a in actions {
                env.step(*a).unwrap();
            }
            env.episode_log().unwrap().clone()
        })
        .collect()
}

#[test]
fn record_takes_the_actions_verbatim() {
    let cfg = quick(1.0, 0.15);
    let actions = wiggle(cfg.episode_steps(), 0.0);
    let log = &session(&cfg, std::slice::from_ref(&actions))[0];
    let t = record(log).unwrap();
    assert_eq!(t.actions, actions);
    assert_eq!(t.actions.len(), 30);
    assert_eq!(t.source.session, "test-session");
    assert_eq!(t.config_hash, cfg.hash());
}

#[test]
fn paper_length_trajectory() {
    let cfg = EnvConfig::paper();
    let t = ActionTrajectory::from_actions(vec![0.0; 1800], &cfg, 82.64, "x").unwrap();
    assert_eq!(t.actions.len(), 1800);
    assert_eq!(
        ActionTrajectory::from_actions(vec![0.0; 1799], &cfg, 82.64, "x").unwrap_err(),
        ReplayError::Truncated { have: 1799, need: 1800 }
    );
}

#[test]
fn truncated_and_out_of_range_logs_are_rejected() {
    let cfg = quick(1.0, 0.0);
    let mut log = session(&cfg, &[vec![0.5; 30]]).remove(0);
    let mut short = log.clone();
    short.steps.truncate(29);
    assert_eq!(record(&short).unwrap_err(), ReplayError::Truncated { have: 29, need: 30 });
    log.steps[17].action = 1.5;
    assert_eq!(record(&log).unwrap_err(), ReplayError::OutOfRange { index: 17, value: 1.5 });
}

#[test]
fn replay_with_the_same_seed_is_bitwise_identical() {
    let cfg = quick(1.0, 0.0);
    let episodes = vec![wiggle(30, 0.0), wiggle(30, 1.0)];
    let logs = session(&cfg, &episodes);
    let first = record(&logs[0]).unwrap();
    let second = record(&logs[1]).unwrap();

    let out = replay(&first, 2, &cfg, SeedPolicy::Same).unwrap();
    assert_eq!(out.curves.members.len(), 2);
    for l in &out.logs {
        assert_eq!(l.rewards(), logs[0].rewards());
        assert_eq!(l.header.tau_start.to_bits(), logs[0].header.tau_start.to_bits());
    }
    // later episodes need the session's history in front of them
    let out = replay_after(&second, &[first.clone()], 1, &cfg, SeedPolicy::Same).unwrap();
    assert_eq!(out.logs[0].rewards(), logs[1].rewards());

    // record ∘ replay ∘ record
    let again = record(&out.logs[0]).unwrap();
    assert_eq!(again.actions, second.actions);
}

#[test]
fn noise_does_not_break_same_seed_identity() {
    let cfg = quick(1.0, 0.15);
    let logs = session(&cfg, &[wiggle(30, 2.0)]);
    let out = replay(&record(&logs[0]).unwrap(), 1, &cfg, SeedPolicy::Same).unwrap();
    assert_eq!(out.logs[0].rewards(), logs[0].rewards());
}

#[test]
fn fresh_seeds_give_distinct_members() {
    let cfg = quick(1.0, 0.15);
    let t = ActionTrajectory::from_actions(wiggle(30, 0.0), &cfg, 100.0, "x").unwrap();
    let out = replay(&t, 5, &cfg, SeedPolicy::Fresh).unwrap();
    assert_eq!(out.curves.members.len(), 5);
    let mut seeds = out.seeds.clone();
    seeds.dedup();
    assert_eq!(seeds.len(), 5);
    assert_ne!(out.curves.members[0], out.curves.members[1]);
    assert_eq!(out.seeds, fresh_seeds(cfg.seed, 5));
}

#[test]
fn zero_action_replay_stays_near_zero() {
    // a developed wake; the start-up transient still drifts after 1 s
    let cfg = EnvConfig { warmup_duration: 15.0, ..quick(2.0, 0.15) };
    let t = ActionTrajectory::from_actions(vec![0.0; 60], &cfg, 100.0, "x").unwrap();
    let out = replay(&t, 1, &cfg, SeedPolicy::Same).unwrap();
    assert!(out.curves.mean.iter().all(|v| v.abs() < 3.0), "{:?}", out.curves.mean.last());
}

#[test]
fn mismatched_protocols_are_refused() {
    let cfg = quick(1.0, 0.0);
    let t = ActionTrajectory::from_actions(vec![0.0; 30], &cfg, 100.0, "x").unwrap();
    let longer = EnvConfig { episode_duration: 2.0, ..cfg.clone() };
    assert!(matches!(replay(&t, 1, &longer, SeedPolicy::Same), Err(ReplayError::ConfigMismatch(_))));
    let faster = EnvConfig { control_rate: 60.0, episode_duration: 0.5, ..cfg.clone() };
    let err = replay(&t, 1, &faster, SeedPolicy::Same).unwrap_err();
    assert!(err.to_string().contains("control rate"), "{err}");
    let other_task = EnvConfig { task: Task::Maximize, ..cfg };
    assert!(replay(&t, 1, &other_task, SeedPolicy::Same).is_err());
}

#[test]
fn final_curve_point_is_the_episode_score() {
    let cfg = quick(1.0, 0.15);
    let log = session(&cfg, &[wiggle(30, 0.3)]).remove(0);
    let curve = running_average_curve(&log.rewards());
    let h = &log.header;
    let mean_tau = log.steps.iter().map(|s| s.torque_smoothed).sum::<f64>() / 30.0;
    let expected = 100.0 * cfg.task.sign() * (mean_tau - h.tau_start) / h.tau_nc;
    assert!((curve.last().unwrap() - expected).abs() < 1e-9);
    assert_eq!(*curve.last().unwrap(), episode_score(&log.rewards()));
}

#[test]
fn trajectory_file_round_trip() {
    let cfg = quick(1.0, 0.0);
    let t = ActionTrajectory::from_actions(wiggle(30, 0.1), &cfg, 99.5, "s").unwrap();
    let mut buf = Vec::new();
    t.write_json(&mut buf).unwrap();
    assert_eq!(ActionTrajectory::read_json(&buf[..]).unwrap(), t);
    let mut bad = t.clone();
    bad.actions[3] = -2.0;
    let mut buf = Vec::new();
    bad.write_json(&mut buf).unwrap();
    assert_eq!(ActionTrajectory::read_json(&buf[..]).unwrap_err(), ReplayError::OutOfRange { index: 3, value: -2.0 });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_bounds_every_member(members in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 12), 1..6)) {
        let set = CurveSet::new(step_times(12, 30.0), members.clone()).unwrap();
        for m in &members {
            for k in 0..12 {
                prop_assert!(set.min[k] <= m[k] && m[k] <= set.max[k]);
                prop_assert!(set.min[k] <= set.mean[k] + 1e-9 && set.mean[k] <= set.max[k] + 1e-9);
            }
        }
    }

    #[test]
    fn dip_then_rise_traces_are_anti_aligned(
        base in 10.0f64..200.0,
        dip in 0.01f64..20.0,
        rise in 0.01f64..20.0,
        window in 5usize..60,
        extra in 0usize..600,
    ) {
        // fall for one window, then climb to a level above the start
        let n = 2 * window + extra;
        let trace: Vec<f64> = (0..n)
            .map(|k| if k < window { base - dip * (k + 1) as f64 / window as f64 } else { base + rise })
            .collect();
        let r = classify_trace(&trace, base, window).unwrap();
        prop_assert_eq!((r.initial_sign(), r.long_run_sign()), (-1, 1));
        prop_assert!(!r.aligned());
    }

    #[test]
    fn monotone_traces_are_aligned(base in 10.0f64..200.0, slope in prop_oneof![-1.0f64..-1e-3, 1e-3f64..1.0], n in 60usize..600) {
        let trace: Vec<f64> = (0..n).map(|k| base + slope * (k + 1) as f64).collect();
        let r = classify_trace(&trace, base, 30).unwrap();
        prop_assert!(r.aligned());
        prop_assert_eq!(r.initial_sign(), if slope > 0.0 { 1 } else { -1 });
    }
}

#[test]
fn probe_runs_on_the_channel() {
    let ev = Evaluator::new(quick(3.0, 0.0)).unwrap();
    let report = anti_alignment_probe(
        &ev,
        &[
            ProbeInput::Step { onset: 0.5, sign: 1.0 },
            ProbeInput::Sinusoid(SinusoidPolicy::new(15.7, 1.0)),
            ProbeInput::Sinusoid(SinusoidPolicy::new(15.7, 2.5)),
        ],
    )
    .unwrap();
    assert_eq!(report.entries.len(), 3);
    assert_eq!(report.entries[0].onset_step, 15);
    assert_eq!(report.entries[0].trace.len(), 90);
    assert!(report.entries.iter().all(|e| e.report.initial_change.is_finite()));
    assert!(report.correlation.is_some_and(|c| (-1.0..=1.0).contains(&c)));
}

#[test]
fn curve_csv_is_deterministic() {
    let set = CurveSet::from_rewards(&[vec![0.1, 0.3], vec![0.3, 0.1]], 30.0).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    set.write_csv(&mut a).unwrap();
    set.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_s,mean,min,max"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[0] - 1.0 / 30.0).abs() < 1e-15);
    assert!((row[1] - 20.0).abs() < 1e-12 && (row[2] - 10.0).abs() < 1e-12 && (row[3] - 30.0).abs() < 1e-12);
}

#[test]
fn vorticity_png_is_red_for_positive_and_blue_for_negative() {
    let mut s = LatticeState::new(FluidConfig { cylinder: false, ..FluidConfig::desk_coarse() }).unwrap();
    let ny = s.ny() as f64;
    // u = -a·y gives ω = +a; flip the sign in the upper half
    s.fill_with(|_, y| {
        let yf = y as f64;
        let u = if yf < ny / 2.0 { -0.01 * yf } else { 0.01 * (yf - ny) };
        (1.0, u, 0.0)
    });
    let mut png = Vec::new();
    export::write_vorticity_png(&mut png, &s, None).unwrap();
    let mut again = Vec::new();
    export::write_vorticity_png(&mut again, &s, None).unwrap();
    assert_eq!(png, again);
    let img = image::load_from_memory(&png).unwrap().to_rgb8();
    assert_eq!((img.width() as usize, img.height() as usize), (s.nx(), s.ny()));
    let h = img.height();
    let bottom = img.get_pixel(10, h - 1 - 5).0; // lattice row 5, ω > 0
    let top = img.get_pixel(10, 5).0; // near the top, ω < 0
    assert!(bottom[0] == 255 && bottom[2] < 128, "{bottom:?}");
    assert!(top[2] == 255 && top[0] < 128, "{top:?}");
}

#[test]
fn unwritable_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let res = export::write_file(blocker.join("curves.csv"), |w| CurveSet::empty().write_csv(w));
    assert!(res.is_err());
}
