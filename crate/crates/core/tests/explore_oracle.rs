mod common;

use navsynth::controller::Goal;
use navsynth::env::{self, geodesic_distance, Heading, MetaAction, Pose};
use navsynth::explore::*;
use navsynth::Point;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check_top2(map: &env::GridMap, p_init: &Point, p_target: &Point) {
    let lib = top2(map, p_init, p_target).unwrap();
    let oracle = common::brute_top2(map, p_init, p_target, DEFAULT_LAMBDA, DEFAULT_NMS_RADIUS).unwrap();
    assert_eq!((lib.first.point, lib.second.point), oracle);
}

#[test]
fn top2_matches_exhaustive_scoring() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let density = r.gen_range(0.0..0.3);
        let map = common::random_map(&mut r, 30, density);
        let free = common::free_cell_centers(&map);
        let p_init = free[r.gen_range(0..free.len())];
        let t = map.targets()[0];
        if map.targets().iter().all(|q| *q == p_init) {
            continue;
        }
        check_top2(&map, &p_init, &t);
    }
}

#[test]
fn scores_match_direct_evaluation() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let map = common::random_map(&mut r, 15, 0.2);
        let free = common::free_cell_centers(&map);
        let p_init = free[0];
        if map.targets().iter().all(|q| *q == p_init) {
            continue;
        }
        let p_target = map.targets()[0];
        let boundary = common::boundary_points(&map);
        for (_, s) in score_reachable_cells(&map, &p_init, &p_target, DEFAULT_LAMBDA).unwrap() {
            let (sp, cl, sc) = common::brute_score(&boundary, map.targets(), &s.point, &p_init, &p_target, DEFAULT_LAMBDA);
            assert!((s.spaciousness - sp).abs() < 1e-9 && (s.closeness - cl).abs() < 1e-9 && (s.score - sc).abs() < 1e-9);
            let direct = score(&map, &s.point, &p_init, &p_target, DEFAULT_LAMBDA).unwrap();
            assert!((direct.score - sc).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&s.spaciousness));
        }
    }
}

#[test]
fn tie_goes_to_lowest_row_major_cell() {
    // Symmetric room: mirror-image maxima score identically.
    let map = env::load_map("resolution 0.1\n#######\n#.....#\n#.....#\n#..T..#\n#.....#\n#.....#\n#######\n").unwrap();
    let t = map.targets()[0];
    let p_init = Point::new(0.35, 0.15);
    let scored = score_reachable_cells(&map, &p_init, &t, DEFAULT_LAMBDA).unwrap();
    let top = top2(&map, &p_init, &t).unwrap();
    let best = scored.iter().map(|(_, s)| s.score).fold(f64::MIN, f64::max);
    let first = scored.iter().find(|(_, s)| s.score >= best - SCORE_TIE_EPS).unwrap().0;
    assert_eq!(top.first_cell, first);
    check_top2(&map, &p_init, &t);
}

#[test]
fn small_room_falls_back_to_global_second_best() {
    let map = env::load_map("resolution 0.1\n#####\n#.T.#\n#...#\n#####\n").unwrap();
    let p_init = Point::new(0.15, 0.15);
    let top = top2(&map, &p_init, &map.targets()[0]).unwrap();
    assert_eq!(top.pick, SecondPick::Unsuppressed);
    assert_ne!(top.first_cell, top.second_cell);
    check_top2(&map, &p_init, &map.targets()[0]);
}

#[test]
fn boundary_point_has_zero_spaciousness_and_target_full_closeness() {
    let map = env::load_map("resolution 0.1\n########\n#......#\n#..T...#\n#......#\n########\n").unwrap();
    let t = map.targets()[0];
    let edge = map.center(map.boundary()[0]);
    let s = score(&map, &edge, &Point::new(0.15, 0.15), &t, DEFAULT_LAMBDA).unwrap();
    assert_eq!(s.spaciousness, 0.0);
    let s = score(&map, &t, &Point::new(0.15, 0.15), &t, DEFAULT_LAMBDA).unwrap();
    assert_eq!(s.closeness, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn score_is_translation_invariant(seed in any::<u64>(), dx in 0usize..6, dy in 0usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let map = common::random_map(&mut r, 12, 0.2);
        // Shift by whole cells by padding the grid with free rows and columns
        // on the low side; boundary membership is kept by walling the pad.
        let (w, h) = (map.width(), map.height());
        let (nw, nh) = (w + dx + 1, h + dy + 1);
        let mut occ = vec![true; nw * nh];
        for row in 0..h {
            for col in 0..w {
                occ[(row + dy + 1) * nw + col + dx + 1] = !map.is_free(env::Cell::new(row, col));
            }
        }
        let off = Point::new((dx + 1) as f64 * 0.1, (dy + 1) as f64 * 0.1);
        let moved_targets: Vec<Point> = map.targets().iter().map(|t| *t + off).collect();
        let shifted = env::GridMap::new("shifted", nw, nh, 0.1, occ, moved_targets, vec![]).unwrap();
        let free = common::free_cell_centers(&map);
        let (p, p_init) = (free[0], free[free.len() - 1]);
        let t = map.targets()[0];
        prop_assume!(map.targets().iter().any(|q| *q != p_init));
        let a = score(&map, &p, &p_init, &t, DEFAULT_LAMBDA).unwrap();
        let b = score(&shifted, &(p + off), &(p_init + off), &(t + off), DEFAULT_LAMBDA).unwrap();
        prop_assert!((a.spaciousness - b.spaciousness).abs() < 1e-12);
        prop_assert!((a.closeness - b.closeness).abs() < 1e-12);
        prop_assert!((a.score - b.score).abs() < 1e-12);
    }

    #[test]
    fn exploration_is_never_shorter_than_direct(seed in any::<u64>()) {
        let map = env::generate_map(&env::MapGenSpec { width: 30, height: 30, density: 0.25, seed, ..Default::default() }, 0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let free = common::free_cell_centers(&map);
        let start = Pose::at(free[r.gen_range(0..free.len())], Heading::EAST);
        let goal = Goal::of(&map, 0);
        prop_assume!(start.position() != goal.position);
        let ex = build_exploration_trajectory(&map, &start, goal, seed).unwrap();
        let traj = &ex.trajectory;
        prop_assert_eq!(traj.replay_mismatch(&map), None);
        prop_assert_eq!(traj.steps.last().map(|s| s.action), Some(MetaAction::End));
        let direct = geodesic_distance(&map, &start.position(), &goal.position).unwrap();
        prop_assert!(ex.route_length_m >= direct - 1e-9, "route {} direct {}", ex.route_length_m, direct);
        for (w, &end) in ex.waypoints.iter().zip(&ex.leg_ends) {
            let at = traj.positions()[end];
            prop_assert!(at.distance(w) <= navsynth::planner::END_TOLERANCE + 1e-9);
        }
    }
}
