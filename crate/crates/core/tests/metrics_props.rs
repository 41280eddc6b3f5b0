use std::collections::BTreeMap;

use navsynth::controller::*;
use navsynth::env::{self, MetaAction};
use navsynth::metrics::*;
use navsynth::synth::{collect_rollouts, StagnationConfig};
use navsynth::{ExactTimeModel, TimeModel64};
use num_rational::Rational64;
use proptest::prelude::*;

#[test]
fn physical_time_of_reference_sequence_is_exact() {
    use MetaAction::*;
    let seq = [MoveAhead, MoveAhead, MoveAhead, MoveAhead, RotateLeft, RotateLeft, Obs, End];
    assert_eq!(TimeModel64::standard().physical_time(seq), 9.3);
    assert_eq!(ExactTimeModel::standard().physical_time(seq), Rational64::new(93, 10));
}

#[test]
fn sot_reference_value() {
    let v = sot_term(true, 9.0, 12.0, TimeModel64::standard().inference_time(100, 20));
    assert!((v - 9.0 / 13.8).abs() < 1e-9);
    assert!((v - 0.6522).abs() < 5e-5);
}

fn episode_sets() -> Vec<(BTreeMap<String, env::GridMap>, Vec<Episode>)> {
    let mut out = Vec::new();
    for (k, policy) in [PolicySpec::Oracle, PolicySpec::Greedy { noise: 0.2 }, PolicySpec::Stuck { pattern: StuckPattern::Shuttle }].into_iter().enumerate() {
        let spec = env::MapGenSpec { width: 36, height: 36, density: 0.3, seed: 40 + k as u64, ..Default::default() };
        let maps: Vec<_> = (0..5).map(|i| env::generate_map(&spec, i).unwrap()).collect();
        let specs: Vec<_> = (0..20).filter_map(|i| EpisodeSpec::sample(&maps, k as u64, i, 1.0)).collect();
        let eps = collect_rollouts(&maps, &specs, &policy, &ReasonerSpec::Stub, &ControllerConfig::default(), Some(&StagnationConfig::default()), 0);
        let by_name = maps.into_iter().map(|m| (m.name().to_string(), m)).collect();
        out.push((by_name, eps.into_iter().map(Result::unwrap).collect()));
    }
    out
}

#[test]
fn orderings_hold_and_sot_falls_with_tau() {
    let tm = TimeModel64::standard();
    for (maps, eps) in episode_sets() {
        let rows = summarize_all(&maps, &eps, &tm).unwrap();
        let (s, spl_v) = (sr(&rows), spl(&rows));
        assert!(spl_v <= s + 1e-12);
        let sweep = tau_sweep(&rows, &DEFAULT_TAU_GRID).unwrap();
        assert_eq!(sweep.len(), 7);
        for w in sweep.windows(2) {
            assert!(w[0].sot <= s + 1e-12);
            if rows.iter().any(|r| r.success && r.reasoning_tokens + r.action_tokens > 0) {
                assert!(w[1].sot < w[0].sot, "sot not decreasing: {:?}", sweep);
            }
        }
        let mut rev = rows.clone();
        rev.reverse();
        assert!((sr(&rev) - s).abs() < 1e-12 && (spl(&rev) - spl_v).abs() < 1e-12);
        assert!((sot(&rev, 0.015).0 - sot(&rows, 0.015).0).abs() < 1e-12);

        let text = navsynth::dataset::to_jsonl(&eps);
        let parsed: Vec<Episode> = navsynth::dataset::read_jsonl(text.as_bytes()).unwrap();
        let again = summarize_all(&maps, &parsed, &tm).unwrap();
        assert!((sot(&again, 0.015).0 - sot(&rows, 0.015).0).abs() < 1e-12);
    }
}

#[test]
fn missing_token_counts_are_reported() {
    let (maps, mut eps) = episode_sets().swap_remove(0);
    eps[0].steps[1].action_tokens = None;
    let err = summarize_all(&maps, &eps, &TimeModel64::standard()).unwrap_err();
    assert!(matches!(err, MetricsError::MissingTokenCounts { episode: 0, step: 1 }));
}

fn row() -> impl Strategy<Value = EpisodeSummary> {
    (any::<bool>(), 0.1f64..50.0, 0.0f64..80.0, 0u64..5000, 0u64..800, 0usize..200, 0.0f64..20.0).prop_map(
        |(success, t_opt, extra, r, a, moves, l_opt)| EpisodeSummary {
            map: "m".into(),
            seed: 0,
            success,
            steps: moves + 1,
            slow_steps: 1,
            move_count: moves,
            l_opt,
            t_optimal: Some(t_opt),
            t_phys: t_opt + extra,
            reasoning_tokens: r,
            action_tokens: a,
        },
    )
}

proptest! {
    #[test]
    fn metric_orderings_on_arbitrary_rows(rows in proptest::collection::vec(row(), 1..40), tau in 0.001f64..1.0) {
        let s = sr(&rows);
        prop_assert!(spl(&rows) <= s + 1e-12);
        prop_assert!(sot(&rows, tau).0 <= s + 1e-12);
        if rows.iter().any(|r| r.success && r.reasoning_tokens + r.action_tokens > 0) {
            prop_assert!(sot(&rows, tau * 1.5).0 < sot(&rows, tau).0);
        }
    }
}
