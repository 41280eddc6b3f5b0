mod common;

use navsynth::env::{self, Heading, MetaAction, Pose};
use navsynth::planner::{astar, optimal_success_time, optimal_time, plan_to_nearest, END_TOLERANCE};
use navsynth::TimeModel64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn astar_cost_equals_dijkstra_on_random_instances() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 200 {
        let density = r.gen_range(0.0..0.35);
        let map = common::random_map(&mut r, 40, density);
        let free = common::free_cell_centers(&map);
        let p = free[r.gen_range(0..free.len())];
        let q = free[r.gen_range(0..free.len())];
        let oracle = common::field_at(&map, &common::dijkstra(&map, &[p]), &q);
        match astar(&map, &p, &q) {
            Ok(path) => {
                assert!((path.length_m - oracle).abs() < 1e-9, "astar {} vs dijkstra {oracle}", path.length_m);
                assert_eq!(path.start(), map.cell_of(&p).unwrap());
                assert_eq!(path.goal(), map.cell_of(&q).unwrap());
            }
            Err(_) => assert!(oracle.is_infinite()),
        }
        checked += 1;
    }
}

#[test]
fn nearer_of_two_targets_sets_optimal_time() {
    let map = env::load_map("resolution 0.1\n###########\n#T...S...T#\n###########\n").unwrap();
    let tm = TimeModel64::standard();
    let start = Pose::new(0.85, 0.15, Heading::EAST);
    let both = optimal_time(&map, &start, map.targets(), &tm).unwrap();
    let near = optimal_time(&map, &start, &map.targets()[1..], &tm).unwrap();
    assert_eq!(both, near);
}

#[test]
fn success_region_time_stops_one_meter_short() {
    let map = env::load_map(&format!("resolution 0.1\n{0}\n#S{1}T#\n{0}\n", "#".repeat(23), ".".repeat(19))).unwrap();
    let tm = TimeModel64::standard();
    let start = Pose::new(0.15, 0.15, Heading::EAST);
    assert!((optimal_time(&map, &start, map.targets(), &tm).unwrap() - 8.1).abs() < 1e-12);
    assert!((optimal_success_time(&map, &start, 1.0, &tm).unwrap() - 4.1).abs() < 1e-12);
    let near = Pose::new(1.35, 0.15, Heading::WEST);
    assert_eq!(optimal_success_time(&map, &near, 1.0, &tm).unwrap(), 0.1);
}

#[test]
fn astar_counts_match_exact_dijkstra() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..60 {
        let density = r.gen_range(0.0..0.4);
        let map = common::random_map(&mut r, 30, density);
        let free = common::free_cell_centers(&map);
        let p = free[r.gen_range(0..free.len())];
        let q = free[r.gen_range(0..free.len())];
        let want = common::dijkstra_exact(&map, &p)[map.index(map.cell_of(&q).unwrap())];
        let got = astar(&map, &p, &q).ok().map(|path| (path.cost.straight, path.cost.diagonal));
        assert_eq!(got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compiled_paths_replay_without_collision(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let map = env::generate_map(&env::MapGenSpec { width: 30, height: 30, density: 0.3, seed, ..Default::default() }, 0).unwrap();
        let free = common::free_cell_centers(&map);
        let heading = Heading::new(r.gen_range(0..12u16) * 30).unwrap();
        let start = Pose::at(free[r.gen_range(0..free.len())], heading);
        let (path, compiled) = plan_to_nearest(&map, &start, map.targets()).unwrap();
        prop_assert!(compiled.actions.iter().all(|a| a.is_locomotion()));
        let mut pose = start;
        for (a, p) in compiled.actions.iter().zip(&compiled.poses) {
            prop_assert_eq!(pose, *p);
            let (next, events) = env::step(&map, &pose, *a);
            prop_assert!(events.is_empty());
            pose = next;
        }
        prop_assert_eq!(pose, compiled.end);
        prop_assert!(pose.position().distance(&map.center(path.goal())) <= END_TOLERANCE + 1e-12);
    }

    #[test]
    fn removing_a_target_never_lowers_optimal_time(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let map = env::generate_map(&env::MapGenSpec { width: 24, height: 24, targets: 3, seed, ..Default::default() }, 0).unwrap();
        let free = common::free_cell_centers(&map);
        let start = Pose::at(free[r.gen_range(0..free.len())], Heading::EAST);
        let tm = TimeModel64::standard();
        let all = optimal_time(&map, &start, map.targets(), &tm).unwrap();
        for skip in 0..3 {
            let fewer: Vec<_> = (0..3).filter(|&i| i != skip).map(|i| map.targets()[i]).collect();
            prop_assert!(optimal_time(&map, &start, &fewer, &tm).unwrap() >= all);
        }
        prop_assert!(plan_to_nearest(&map, &start, map.targets()).unwrap().1.actions.iter().all(|a| *a != MetaAction::End));
    }
}
