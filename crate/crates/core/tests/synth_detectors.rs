mod common;

use navsynth::controller::*;
use navsynth::env::{self, Event, Heading, Pose, StagnationKind};
use navsynth::synth::*;
use navsynth::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counts of (repetitive, no-progress) firings checked against the oracles.
fn compare_on_random_traces(n: usize, seed: u64) -> (usize, usize, usize) {
    let cfg = StagnationConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut maps = Vec::new();
    for _ in 0..20 {
        let m = common::random_map(&mut r, 30, 0.15);
        let field = common::dijkstra(&m, m.targets());
        maps.push((m, field));
    }
    let (mut rep, mut prog, mut mismatches) = (0, 0, 0);
    for i in 0..n {
        let (map, field) = &maps[i % maps.len()];
        let len = r.gen_range(1..=200);
        let trace = common::random_walk(map, &mut r, len - 1);
        let ep_seed = r.gen::<u64>();
        for t in 0..trace.len() {
            let lib = detect_repetitive(&trace, t, &cfg).map(|e| e.witness);
            let oracle = common::brute_repetitive(&trace, t, cfg.t_stag, cfg.delta_stag);
            mismatches += usize::from(lib != oracle);
            rep += usize::from(oracle.is_some());
            if t >= cfg.dt_low {
                let dt = sample_dt(ep_seed, t, &cfg);
                let lib = detect_no_progress(&trace, t, map, &cfg, ep_seed);
                let oracle = common::brute_no_progress(map, field, &trace, t, dt);
                mismatches += usize::from(lib.is_some() != oracle || lib.is_some_and(|e| e.witness != dt));
                prog += usize::from(oracle);
            }
        }
    }
    (rep, prog, mismatches)
}

#[test]
fn detectors_match_brute_force() {
    let (rep, prog, mismatches) = compare_on_random_traces(2_000, 17);
    assert_eq!(mismatches, 0);
    assert!(rep > 0 && prog > 0, "oracles never fired: {rep} {prog}");
}

#[test]
fn walking_away_fires_for_every_window() {
    let map = env::load_map(&format!("resolution 0.1\n{0}\n#T{1}#\n{0}\n", "#".repeat(203), ".".repeat(200))).unwrap();
    let trace: Vec<Point> = (0..60).map(|i| Point::new(0.25 + 0.25 * i as f64, 0.15)).collect();
    let cfg = StagnationConfig::default();
    for t in 35..60 {
        assert!(detect_no_progress(&trace, t, &map, &cfg, 9).is_some());
    }
    let toward: Vec<Point> = trace.iter().rev().copied().collect();
    assert!((0..60).all(|t| detect_no_progress(&toward, t, &map, &cfg, 9).is_none()));
}

fn room(side: usize) -> env::GridMap {
    let mut text = format!("resolution 0.1\n{}\n", "#".repeat(side));
    for r in 1..side - 1 {
        let mid: String = (1..side - 1).map(|c| if r == side / 2 && c == side - 3 { 'T' } else { '.' }).collect();
        text.push_str(&format!("#{mid}#\n"));
    }
    text.push_str(&"#".repeat(side));
    env::load_map(&text).unwrap()
}

#[test]
fn stuck_policy_is_caught_by_repetition() {
    let map = room(30);
    let goal = Goal::of(&map, 0);
    let mut stuck = StuckPolicy::new(StuckPattern::Spin);
    let mut stub = StubReasoner::new();
    let start = Pose::new(0.45, 0.45, Heading::SOUTH);
    let ep = rollout_with_stagnation(&map, start, goal, &mut stuck, &mut stub, &ControllerConfig::default(), &StagnationConfig::default(), 1).unwrap();
    let first = ep.steps.iter().position(|s| s.events.iter().any(|e| matches!(e, Event::Stagnation { kind: StagnationKind::Repetitive, .. })));
    assert!(first.is_some_and(|t| t <= 40), "first repetitive obs at {first:?}");
}

#[test]
fn oracle_policy_never_triggers_detectors() {
    let map = room(40);
    let goal = Goal::of(&map, 0);
    let ep = rollout_with_stagnation(
        &map,
        Pose::new(0.25, 0.25, Heading::WEST),
        goal,
        &mut OraclePolicy::default(),
        &mut StubReasoner::new(),
        &ControllerConfig::default(),
        &StagnationConfig::default(),
        4,
    )
    .unwrap();
    assert_eq!(ep.outcome, Outcome::Success);
    assert!(ep.steps.iter().all(|s| !s.events.iter().any(|e| matches!(e, Event::Stagnation { .. }))));
}

#[test]
fn stagnation_obs_needs_a_fast_step_in_between() {
    let map = room(30);
    let ep = rollout_with_stagnation(
        &map,
        Pose::new(0.45, 0.45, Heading::SOUTH),
        Goal::of(&map, 0),
        &mut StuckPolicy::new(StuckPattern::Forward),
        &mut StubReasoner::new(),
        &ControllerConfig::default(),
        &StagnationConfig::default(),
        2,
    )
    .unwrap();
    let triggered: Vec<usize> = ep
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.events.iter().any(|e| matches!(e, Event::Stagnation { .. })))
        .map(|(i, _)| i)
        .collect();
    assert!(triggered.len() > 1);
    for w in triggered.windows(2) {
        assert!(w[1] - w[0] >= 3, "obs at {} and {}", w[0], w[1]);
    }
    for &t in &triggered {
        assert_eq!(ep.steps[t - 1].mode, Mode::Fast);
    }
}
