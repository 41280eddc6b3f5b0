use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    run_episode_with, ControllerConfig, ControllerError, Episode, Goal, PolicySpec, ReasonerSpec, SlowTrigger,
};
use crate::env::{GridMap, Heading, Pose};
use crate::rng;

/// Everything needed to run one episode of a suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    /// Index into the suite's map list.
    pub map: usize,
    pub start: Pose,
    pub goal: Goal,
    pub seed: u64,
}

pub fn derive_episode_seed(suite_seed: u64, index: usize) -> u64 {
    rng::derive_seed(suite_seed, "episode", index as u64)
}

impl EpisodeSpec {
    /// Episode `index` of a suite: map `index mod maps.len()`, a start drawn
    /// from the map's marked starts (or any free cell that can reach a
    /// target), a random heading, and the geodesically nearest target as
    /// goal.
    pub fn sample(maps: &[GridMap], suite_seed: u64, index: usize, min_start_distance: f64) -> Option<Self> {
        let map_ix = index % maps.len();
        let map = &maps[map_ix];
        let seed = derive_episode_seed(suite_seed, index);
        let mut r = rng::stream(seed, "setup");
        let reachable = |p: &crate::Point| map.distance_to_targets(p).is_finite();
        let start = if map.starts().is_empty() {
            let candidates: Vec<_> = map
                .free_cells()
                .map(|c| map.center(c))
                .filter(|p| reachable(p) && map.distance_to_targets(p) > min_start_distance)
                .collect();
            *candidates.get(r.gen_range(0..candidates.len().max(1)))?
        } else {
            map.starts()[r.gen_range(0..map.starts().len())]
        };
        if !reachable(&start) {
            return None;
        }
        let heading = Heading::new(r.gen_range(0..12u16) * 30).expect("multiple of 30");
        let from = map.cell_of(&start)?;
        let field = crate::env::DistanceField::from_sources(map, &[from]);
        let goal_ix = (0..map.targets().len())
            .filter_map(|i| map.cell_of(&map.targets()[i]).and_then(|c| field.cost(map, c)).map(|d| (d, i)))
            .min()?
            .1;
        Some(Self { map: map_ix, start: Pose::at(start, heading), goal: Goal::of(map, goal_ix), seed })
    }
}

/// Runs every spec, in parallel on `jobs` threads (0 = all cores). Results
/// are returned in spec order and do not depend on `jobs`.
pub fn run_batch<F>(
    maps: &[GridMap],
    specs: &[EpisodeSpec],
    policy: &PolicySpec,
    reasoner: &ReasonerSpec,
    cfg: &ControllerConfig,
    make_trigger: F,
    jobs: usize,
) -> Vec<Result<Episode, ControllerError>>
where
    F: Fn(&EpisodeSpec) -> Box<dyn SlowTrigger> + Sync,
{
    let run = |spec: &EpisodeSpec| {
        let map = &maps[spec.map];
        let mut p = policy.build();
        let mut r = reasoner.build();
        let mut trigger = make_trigger(spec);
        run_episode_with(map, spec.start, spec.goal, p.as_mut(), r.as_mut(), trigger.as_mut(), cfg, spec.seed)
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| specs.par_iter().map(run).collect())
}
