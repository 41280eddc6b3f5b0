use navsynth::env::{self, Heading, MetaAction, Pose};
use navsynth::memory::{kept_indices, parse_memory_text, MemoryGraph};
use proptest::prelude::*;

fn scan() -> env::PanoramicScan {
    let map = env::load_map("resolution 0.1\n#####\n#.T.#\n#####\n").unwrap();
    env::panoramic(&map, &Pose::new(0.15, 0.15, Heading::EAST))
}

fn build(edges: &[Vec<MetaAction>], cap: usize) -> MemoryGraph {
    let s = scan();
    let mut m = MemoryGraph::new(cap);
    m.append_landmark(s.clone(), Pose::new(0.15, 0.15, Heading::EAST), 0, vec![]);
    for (i, e) in edges.iter().enumerate() {
        m.append_landmark(s.clone(), Pose::new(0.15, 0.15, Heading::EAST), i + 1, e.clone());
    }
    m
}

#[test]
fn golden_text_is_reproduced_byte_for_byte() {
    use MetaAction::{MoveAhead as M, RotateLeft as L, RotateRight as R};
    let mut edge = vec![R, M, R, R, M, L, M, M, M, L, M, L];
    edge.extend([M; 11]);
    edge.extend([L; 5]);
    let golden = include_str!("data/memory_golden.txt");
    assert_eq!(build(&[edge], 10).to_text(), golden);
}

#[test]
fn small_examples() {
    assert_eq!(MemoryGraph::new(10).to_text(), "Your current view is <image>.");
    let one = build(&[], 10);
    assert_eq!(one.to_text(), "At landmark1, you see <image><image><image><image>; Your current view is <image>.");
    let two = build(&[vec![MetaAction::RotateRight, MetaAction::MoveAhead]], 10);
    assert!(two.to_text().contains("Executed RotateRight 30.0, MoveAhead 0.25 from landmark 1 to landmark 2; "));
    let three = build(&[vec![MetaAction::MoveAhead], vec![MetaAction::RotateLeft]], 2);
    assert_eq!(three.len(), 2);
    assert_eq!(three.edges()[0].actions, vec![MetaAction::MoveAhead, MetaAction::RotateLeft]);
}

fn motor() -> impl Strategy<Value = MetaAction> {
    prop_oneof![Just(MetaAction::MoveAhead), Just(MetaAction::RotateLeft), Just(MetaAction::RotateRight)]
}

proptest! {
    #[test]
    fn pruning_invariants(
        edges in proptest::collection::vec(proptest::collection::vec(motor(), 0..6), 0..40),
        cap in prop_oneof![Just(5usize), Just(10), Just(15)],
    ) {
        let m = build(&edges, cap);
        let total: usize = edges.iter().map(Vec::len).sum();
        prop_assert!(m.len() <= cap);
        prop_assert_eq!(m.len(), (edges.len() + 1).min(cap));
        prop_assert_eq!(m.edges().len(), m.len().saturating_sub(1));
        prop_assert_eq!(m.action_count(), total);
        prop_assert_eq!(m.landmarks()[0].step_index, 0);
        prop_assert_eq!(m.landmarks().last().unwrap().step_index, edges.len());
        prop_assert_eq!(m.prune(), m.prune().prune());
        prop_assert!(m.landmarks().windows(2).all(|w| w[0].step_index < w[1].step_index));
        let parsed = parse_memory_text(&m.to_text()).unwrap();
        prop_assert_eq!(parsed.landmarks, m.len());
        let lib: Vec<Vec<MetaAction>> = m.edges().iter().map(|e| e.actions.clone()).collect();
        prop_assert_eq!(parsed.edges, lib);
    }

    #[test]
    fn kept_indices_follow_rounding_formula(n in 1usize..80, cap in 2usize..20) {
        let kept = kept_indices(n, cap);
        if n <= cap {
            prop_assert_eq!(kept, (0..n).collect::<Vec<_>>());
        } else {
            let mut want: Vec<usize> = (0..cap).map(|i| ((i * (n - 1)) as f64 / (cap - 1) as f64 + 0.5).floor() as usize).collect();
            want.dedup();
            prop_assert_eq!(kept, want);
        }
    }
}
