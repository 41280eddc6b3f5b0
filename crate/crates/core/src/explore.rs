//! Exploration waypoints: a score that trades free space around a point
//! against closeness to the target, top-2 selection, and trajectories that
//! pass through both waypoints before reaching the target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Episode, Goal, Mode, Outcome, StepRecord, EPISODE_SCHEMA_VERSION, SUCCESS_RADIUS, ACTION_TOKENS};
use crate::env::{self, Cell, DistanceField, GridMap, MetaAction, Pose};
use crate::planner::{astar_cells, compile_from, PlanError};
use crate::{Point, Point2, RealScalar};

pub const DEFAULT_LAMBDA: f64 = 0.7;
pub const DEFAULT_NMS_RADIUS: f64 = 1.0;
/// Scores closer than this to the best one count as tied.
pub const SCORE_TIE_EPS: f64 = 1e-12;
/// Slack added to the suppression radius so points at exactly the radius
/// are suppressed regardless of rounding.
pub const NMS_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("fewer than two candidate points are reachable")]
    InsufficientCandidates,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint<F = f64> {
    pub point: Point2<F>,
    pub spaciousness: F,
    pub closeness: F,
    pub score: F,
}

/// `max_{q∈G} ‖p_init − q‖`.
fn closeness_scale<F: RealScalar>(map: &GridMap, p_init: &Point2<F>) -> F {
    map.targets().iter().map(|q| p_init.distance(&q.cast())).fold(F::zero(), F::max)
}

/// Score of an arbitrary point, evaluated directly over the boundary set.
///
/// `spaciousness = min_U ‖p−q‖ / max_U ‖p−q‖` over boundary cell centers;
/// `closeness = 1 − ‖p − p_target‖ / max_G ‖p_init − q‖`;
/// `score = spaciousness + λ·closeness`.
pub fn score<F: RealScalar>(
    map: &GridMap,
    p: &Point2<F>,
    p_init: &Point2<F>,
    p_target: &Point2<F>,
    lambda: F,
) -> Result<ScoredPoint<F>, ExploreError> {
    let mut lo = F::infinity();
    let mut hi = F::zero();
    for &c in map.boundary() {
        let d = p.distance(&map.center(c).cast());
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if map.boundary().is_empty() || hi == F::zero() {
        return Err(ExploreError::DegenerateGeometry("all boundary points coincide with p"));
    }
    let scale = closeness_scale(map, p_init);
    if scale == F::zero() {
        return Err(ExploreError::DegenerateGeometry("every target coincides with the start"));
    }
    let spaciousness = lo / hi;
    let closeness = F::one() - p.distance(p_target) / scale;
    Ok(ScoredPoint { point: *p, spaciousness, closeness, score: spaciousness + lambda * closeness })
}

/// Exact squared distance (in cells) from every cell to the nearest source,
/// by separable lower envelopes of parabolas.
fn squared_edt(width: usize, height: usize, is_source: impl Fn(usize, usize) -> bool) -> Vec<Option<u64>> {
    const INF: i64 = i64::MAX / 4;
    let mut cols = vec![INF; width * height];
    // Pass 1: along each column.
    for c in 0..width {
        let mut last: Option<usize> = None;
        for r in 0..height {
            if is_source(r, c) {
                last = Some(r);
            }
            if let Some(l) = last {
                cols[r * width + c] = (r - l) as i64;
            }
        }
        let mut next: Option<usize> = None;
        for r in (0..height).rev() {
            if is_source(r, c) {
                next = Some(r);
            }
            if let Some(n) = next {
                let d = (n - r) as i64;
                let i = r * width + c;
                cols[i] = cols[i].min(d);
            }
        }
    }
    let f: Vec<i64> = cols.iter().map(|&d| if d >= INF { INF } else { d * d }).collect();
    // Pass 2: along each row, lower envelope of q ↦ (x−q)² + f(q).
    let mut out = vec![None; width * height];
    let mut v = vec![0usize; width];
    let mut z = vec![0f64; width + 1];
    for r in 0..height {
        let row = &f[r * width..(r + 1) * width];
        let sources: Vec<usize> = (0..width).filter(|&q| row[q] < INF).collect();
        if sources.is_empty() {
            continue;
        }
        let mut k = 0;
        v[0] = sources[0];
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for &q in &sources[1..] {
            loop {
                let p = v[k];
                let s = ((row[q] + (q * q) as i64) - (row[p] + (p * p) as i64)) as f64 / (2 * (q - p)) as f64;
                if s <= z[k] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
        let mut k = 0;
        for x in 0..width {
            while z[k + 1] < x as f64 {
                k += 1;
            }
            let q = v[k];
            let dx = x as i64 - q as i64;
            out[r * width + x] = Some((dx * dx + row[q]) as u64);
        }
    }
    out
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull vertices (monotone chain) of integer points.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Scores every free cell center reachable from `p_init`, in row-major
/// order.
pub fn score_reachable_cells(
    map: &GridMap,
    p_init: &Point,
    p_target: &Point,
    lambda: f64,
) -> Result<Vec<(Cell, ScoredPoint)>, ExploreError> {
    let init_cell = map.require_cell(p_init).map_err(PlanError::from)?;
    if map.boundary().is_empty() {
        return Err(ExploreError::DegenerateGeometry("no boundary cells"));
    }
    let scale = closeness_scale(map, p_init);
    if scale == 0.0 {
        return Err(ExploreError::DegenerateGeometry("every target coincides with the start"));
    }
    let field = DistanceField::from_sources(map, &[init_cell]);
    let w = map.width();
    let mut is_boundary = vec![false; map.cell_count()];
    for &c in map.boundary() {
        is_boundary[map.index(c)] = true;
    }
    let edt = squared_edt(w, map.height(), |r, c| is_boundary[r * w + c]);
    let hull = convex_hull(map.boundary().iter().map(|c| (c.col as i64, c.row as i64)).collect());

    let mut out = Vec::new();
    for cell in map.free_cells() {
        if !field.reachable(map, cell) {
            continue;
        }
        let (x, y) = (cell.col as i64, cell.row as i64);
        let max_sq = hull.iter().map(|&(hx, hy)| (hx - x).pow(2) + (hy - y).pow(2)).max().unwrap_or(0);
        if max_sq == 0 {
            return Err(ExploreError::DegenerateGeometry("all boundary points coincide with p"));
        }
        let min_sq = edt[map.index(cell)].expect("boundary is non-empty");
        let spaciousness = (min_sq as f64 / max_sq as f64).sqrt();
        let p = map.center(cell);
        let closeness = 1.0 - p.distance(p_target) / scale;
        out.push((cell, ScoredPoint { point: p, spaciousness, closeness, score: spaciousness + lambda * closeness }));
    }
    Ok(out)
}

/// How the second waypoint was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondPick {
    /// Best candidate farther than the suppression radius from the first.
    Suppressed,
    /// Nothing survived suppression; global second best.
    Unsuppressed,
    /// Only one candidate exists; both waypoints are the same point.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Top2 {
    pub first: ScoredPoint,
    pub second: ScoredPoint,
    pub first_cell: Cell,
    pub second_cell: Cell,
    pub pick: SecondPick,
}

/// First candidate (in the given order) whose score is within
/// [`SCORE_TIE_EPS`] of the best.
pub fn best_index<'a, I>(scores: I) -> Option<usize>
where
    I: IntoIterator<Item = &'a f64> + Clone,
{
    let max = scores.clone().into_iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.into_iter().position(|&s| s >= max - SCORE_TIE_EPS)
}

pub fn top2(map: &GridMap, p_init: &Point, p_target: &Point) -> Result<Top2, ExploreError> {
    top2_with(map, p_init, p_target, DEFAULT_LAMBDA, DEFAULT_NMS_RADIUS)
}

/// The highest-scoring reachable cell center, and the highest-scoring one
/// farther than `nms_radius` from it. Ties go to the lowest `(row, col)`.
pub fn top2_with(map: &GridMap, p_init: &Point, p_target: &Point, lambda: f64, nms_radius: f64) -> Result<Top2, ExploreError> {
    let scored = score_reachable_cells(map, p_init, p_target, lambda)?;
    let scores: Vec<f64> = scored.iter().map(|(_, s)| s.score).collect();
    let i1 = best_index(&scores).ok_or(ExploreError::InsufficientCandidates)?;
    let (c1, s1) = scored[i1];
    let far: Vec<usize> =
        (0..scored.len()).filter(|&i| scored[i].1.point.distance(&s1.point) > nms_radius + NMS_SLACK).collect();
    let pick_from = |idx: &[usize]| {
        let sub: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        best_index(&sub).map(|k| idx[k])
    };
    let (i2, pick) = if let Some(i) = pick_from(&far) {
        (i, SecondPick::Suppressed)
    } else {
        let rest: Vec<usize> = (0..scored.len()).filter(|&i| i != i1).collect();
        match pick_from(&rest) {
            Some(i) => (i, SecondPick::Unsuppressed),
            None => (i1, SecondPick::Single),
        }
    };
    let (c2, s2) = scored[i2];
    Ok(Top2 { first: s1, second: s2, first_cell: c1, second_cell: c2, pick })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExplorationFlags {
    /// A waypoint leg could not be planned; the trajectory goes straight to
    /// the target.
    pub direct_fallback: bool,
    /// The second waypoint ignores the suppression radius.
    pub unsuppressed: bool,
    /// Both waypoints are the same point and are visited once.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationTrajectory {
    pub trajectory: Episode,
    pub waypoints: Vec<Point>,
    /// Step index at which each waypoint leg ends.
    pub leg_ends: Vec<usize>,
    pub top2: Top2,
    pub flags: ExplorationFlags,
    /// Geodesic length of `start → waypoints → target` over cell centers.
    pub route_length_m: f64,
}

/// Builds `start → a → b → target` with `(a, b)` the top-2 waypoints in the
/// order of shorter total geodesic length (first waypoint first on ties),
/// compiled leg by leg and terminated with `End`.
pub fn build_exploration_trajectory(
    map: &GridMap,
    start: &Pose,
    goal: Goal,
    seed: u64,
) -> Result<ExplorationTrajectory, ExploreError> {
    let p_init = start.position();
    let top = top2(map, &p_init, &goal.position)?;
    let mut flags = ExplorationFlags {
        unsuppressed: top.pick == SecondPick::Unsuppressed,
        degenerate: top.pick == SecondPick::Single,
        ..Default::default()
    };
    let target_cell = map.require_cell(&goal.position).map_err(PlanError::from)?;
    let init_cell = map.require_cell(&p_init).map_err(PlanError::from)?;
    let (c1, c2) = (top.first_cell, top.second_cell);

    let f1 = DistanceField::from_sources(map, &[c1]);
    let (waypoints, mut route_length_m): (Vec<Cell>, f64) = if flags.degenerate {
        (vec![c1], f1.meters(map, init_cell) + f1.meters(map, target_cell))
    } else {
        let f2 = DistanceField::from_sources(map, &[c2]);
        let d = |f: &DistanceField, c: Cell| f.meters(map, c);
        let a = d(&f1, init_cell) + d(&f1, c2) + d(&f2, target_cell);
        let b = d(&f2, init_cell) + d(&f2, c1) + d(&f1, target_cell);
        if b < a { (vec![c2, c1], b) } else { (vec![c1, c2], a) }
    };

    let legs = |cells: &[Cell]| -> Result<(Vec<MetaAction>, Vec<Pose>, Vec<usize>, Pose), PlanError> {
        let mut pose = *start;
        let mut actions = Vec::new();
        let mut poses = Vec::new();
        let mut ends = Vec::new();
        for &to in cells {
            let from = map.require_cell(&pose.position())?;
            let path = astar_cells(map, from, to)?;
            let compiled = compile_from(map, &path, &pose)?;
            actions.extend(compiled.actions);
            poses.extend(compiled.poses);
            pose = compiled.end;
            ends.push(actions.len());
        }
        Ok((actions, poses, ends, pose))
    };
    let mut route: Vec<Cell> = waypoints.clone();
    route.push(target_cell);
    let (actions, poses, mut leg_ends, end) = match legs(&route) {
        Ok(r) => r,
        Err(_) => {
            flags.direct_fallback = true;
            legs(&[target_cell])?
        }
    };
    leg_ends.pop();

    let trajectory = episode_from_plan(map, start, goal, seed, &actions, &poses, end);
    let waypoints = if flags.direct_fallback { Vec::new() } else { waypoints.iter().map(|&c| map.center(c)).collect() };
    if flags.direct_fallback {
        leg_ends.clear();
        route_length_m = DistanceField::from_sources(map, &[init_cell]).meters(map, target_cell);
    }
    Ok(ExplorationTrajectory { trajectory, waypoints, leg_ends, top2: top, flags, route_length_m })
}

/// Fast-mode episode that executes `actions` from `start` and ends with
/// `End` at `end`. `poses[i]` is the pose before `actions[i]`.
pub fn episode_from_plan(
    map: &GridMap,
    start: &Pose,
    goal: Goal,
    seed: u64,
    actions: &[MetaAction],
    poses: &[Pose],
    end: Pose,
) -> Episode {
    let fast = |pose: &Pose, action: MetaAction, events: Vec<env::Event>| StepRecord {
        x: pose.x,
        y: pose.y,
        heading: pose.heading,
        action,
        mode: Mode::Fast,
        reasoning_tokens: None,
        action_tokens: Some(ACTION_TOKENS),
        events,
        reasoning: None,
    };
    let mut steps: Vec<StepRecord> = actions.iter().zip(poses).map(|(&a, p)| fast(p, a, Vec::new())).collect();
    steps.push(fast(&end, MetaAction::End, vec![env::Event::Terminated]));
    let outcome = if map.distance_to_targets(&end.position()) <= SUCCESS_RADIUS {
        Outcome::Success
    } else {
        Outcome::Misidentification
    };
    Episode {
        schema_version: EPISODE_SCHEMA_VERSION,
        map: map.name().to_string(),
        seed,
        start: *start,
        goal,
        outcome,
        steps,
        final_pose: end,
    }
}

/// Shortest-path trajectory from `start` to the goal target, compiled and
/// terminated with `End`.
pub fn astar_trajectory(map: &GridMap, start: &Pose, goal: Goal, seed: u64) -> Result<Episode, ExploreError> {
    let from = map.require_cell(&start.position()).map_err(PlanError::from)?;
    let to = map.require_cell(&goal.position).map_err(PlanError::from)?;
    let path = astar_cells(map, from, to)?;
    let compiled = compile_from(map, &path, start)?;
    Ok(episode_from_plan(map, start, goal, seed, &compiled.actions, &compiled.poses, compiled.end))
}
