//! Turns a cell path into meta actions by closed-loop pursuit.
//!
//! At each decision the agent aims at the farthest path cell it can reach in
//! a straight sweep, turns by the fewest 30° steps that bring its heading
//! within 15° of that bearing (a half turn goes left), and moves 0.25 m.
//! Every move is simulated with [`env::step`], so the emitted sequence
//! replays without collisions on the map it was compiled for.

use crate::env::{self, sweep_is_free, Heading, MetaAction, Pose, MOVE_DISTANCE};
use crate::Point;

use super::{CellPath, PlanError};

/// Compilation stops once the agent is this close to the final cell center.
pub const ARRIVAL_RADIUS: f64 = MOVE_DISTANCE / 2.0;
/// Guaranteed bound on the distance between the end pose and the final cell
/// center.
pub const END_TOLERANCE: f64 = MOVE_DISTANCE;

const PROGRESS_WINDOW: usize = 8;
const MAX_FALLBACK_OFFSET_DEG: f64 = 90.0;

/// Output of compilation: the actions plus the pose before each action.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPath {
    pub actions: Vec<MetaAction>,
    pub poses: Vec<Pose>,
    pub end: Pose,
}

impl CompiledPath {
    pub fn move_count(&self) -> usize {
        self.actions.iter().filter(|a| **a == MetaAction::MoveAhead).count()
    }
}

/// Compiles `path` for an agent starting at the center of the path's first
/// cell with heading `start_heading`.
pub fn path_to_actions(
    map: &env::GridMap,
    path: &CellPath,
    start_heading: Heading,
) -> Result<CompiledPath, PlanError> {
    let start = Pose::at(map.center(path.start()), start_heading);
    compile_from(map, path, &start)
}

/// Rotations (all in one direction) taking `from` to `to`.
pub fn rotations(from: Heading, to: Heading) -> impl Iterator<Item = MetaAction> {
    let turns = from.turns_to(to);
    let action = if turns >= 0 { MetaAction::RotateLeft } else { MetaAction::RotateRight };
    std::iter::repeat_n(action, turns.unsigned_abs() as usize)
}

/// Heading with the fewest turns from `current` whose offset from `bearing`
/// is at most 15°; ties go to the counterclockwise (left) candidate.
pub fn aligned_heading(current: Heading, bearing_deg: f64) -> Heading {
    if current.offset_from(bearing_deg) <= 15.0 {
        return current;
    }
    let mut best: Option<(u32, bool, Heading)> = None;
    for k in 0..12u16 {
        let h = Heading::new(k * 30).expect("multiple of 30");
        if h.offset_from(bearing_deg) > 15.0 {
            continue;
        }
        let turns = current.turns_to(h);
        let key = (turns.unsigned_abs(), turns < 0, h);
        if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
            best = Some(key);
        }
    }
    best.expect("some heading is always within 15°").2
}

struct Pursuit<'a> {
    map: &'a env::GridMap,
    centers: Vec<Point>,
    pose: Pose,
    progress: usize,
    out: CompiledPath,
}

impl Pursuit<'_> {
    fn emit(&mut self, action: MetaAction) {
        let (next, events) = env::step(self.map, &self.pose, action);
        debug_assert!(events.is_empty(), "compiled motion must not collide");
        self.out.actions.push(action);
        self.out.poses.push(self.pose);
        self.pose = next;
    }

    fn lookahead(&self) -> usize {
        let here = self.pose.position();
        let mut k = self.progress;
        while k + 1 < self.centers.len() && sweep_is_free(self.map, &here, &self.centers[k + 1]) {
            k += 1;
        }
        k
    }

    fn landing(&self, heading: Heading) -> Option<Point> {
        let probe = Pose { heading, ..self.pose };
        let (next, events) = env::step(self.map, &probe, MetaAction::MoveAhead);
        events.is_empty().then(|| next.position())
    }

    fn update_progress(&mut self) {
        let here = self.pose.position();
        let hi = (self.progress + PROGRESS_WINDOW).min(self.centers.len() - 1);
        let mut best = self.progress;
        for k in self.progress..=hi {
            if here.distance(&self.centers[k]) <= here.distance(&self.centers[best]) {
                best = k;
            }
        }
        self.progress = best;
    }
}

/// Compiles `path` starting from an arbitrary pose (which need not sit on
/// the first cell's center).
pub fn compile_from(map: &env::GridMap, path: &CellPath, start: &Pose) -> Result<CompiledPath, PlanError> {
    if path.cells.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    let centers: Vec<Point> = path.cells.iter().map(|&c| map.center(c)).collect();
    let goal = *centers.last().expect("non-empty");
    let mut run = Pursuit {
        map,
        centers,
        pose: *start,
        progress: 0,
        out: CompiledPath { actions: Vec::new(), poses: Vec::new(), end: *start },
    };
    let budget = 64 + 12 * path.cells.len();

    for _ in 0..budget {
        let here = run.pose.position();
        let to_goal = here.distance(&goal);
        if to_goal <= ARRIVAL_RADIUS {
            run.out.end = run.pose;
            return Ok(run.out);
        }
        let target = run.centers[run.lookahead()];
        let to_target = here.distance(&target);
        let bearing = here.bearing_deg(&target);

        let preferred = aligned_heading(run.pose.heading, bearing);
        let chosen = match run.landing(preferred) {
            Some(q) if q.distance(&target) < to_target => Some(preferred),
            _ => {
                // Blocked or not improving: try the other headings, nearest
                // to the bearing first, then fewest turns, left before right.
                let mut alternatives: Vec<Heading> = (0..12u16)
                    .map(|k| Heading::new(k * 30).expect("multiple of 30"))
                    .filter(|h| *h != preferred && h.offset_from(bearing) <= MAX_FALLBACK_OFFSET_DEG)
                    .collect();
                alternatives.sort_by(|a, b| {
                    let ka = (a.offset_from(bearing), run.pose.heading.turns_to(*a).unsigned_abs(), run.pose.heading.turns_to(*a) < 0);
                    let kb = (b.offset_from(bearing), run.pose.heading.turns_to(*b).unsigned_abs(), run.pose.heading.turns_to(*b) < 0);
                    ka.partial_cmp(&kb).expect("finite offsets")
                });
                alternatives
                    .into_iter()
                    .find(|h| run.landing(*h).is_some_and(|q| q.distance(&target) < to_target))
            }
        };

        let Some(heading) = chosen else {
            if to_goal <= END_TOLERANCE {
                run.out.end = run.pose;
                return Ok(run.out);
            }
            return lattice_search(map, goal, start).ok_or(PlanError::Stuck { x: here.x, y: here.y });
        };
        for r in rotations(run.pose.heading, heading) {
            run.emit(r);
        }
        run.emit(MetaAction::MoveAhead);
        run.update_progress();
    }
    let here = run.pose.position();
    lattice_search(map, goal, start).ok_or(PlanError::Stuck { x: here.x, y: here.y })
}

const LATTICE_BIN: f64 = 0.05;
const LATTICE_MAX_EXPANSIONS: usize = 400_000;
const MOVE_COST: u32 = 10;
const TURN_COST: u32 = 6;

/// Best-first search over poses reachable by single meta actions, used when
/// pursuit cannot make progress. Poses are merged when they share a heading
/// and a `LATTICE_BIN` position bin; the first pose reaching a bin is kept
/// exactly, so the result replays without drift.
fn lattice_search(map: &env::GridMap, goal: Point, start: &Pose) -> Option<CompiledPath> {
    use std::cmp::Reverse;
    use std::collections::{BinaryHeap, HashMap};

    let goal_cell = map.cell_of(&goal)?;
    let field = env::DistanceField::from_sources(map, &[goal_cell]);
    let h = |p: &Point| -> Option<u32> {
        let m = field.meters(map, map.cell_of(p)?);
        m.is_finite().then(|| ((m - END_TOLERANCE).max(0.0) / MOVE_DISTANCE).floor() as u32 * MOVE_COST)
    };
    let key = |p: &Pose| ((p.x / LATTICE_BIN).round() as i64, (p.y / LATTICE_BIN).round() as i64, p.heading.step_index());

    // (pose, parent, action into this node, g)
    let mut nodes: Vec<(Pose, usize, MetaAction, u32)> = vec![(*start, usize::MAX, MetaAction::End, 0)];
    let mut best: HashMap<(i64, i64, usize), usize> = HashMap::from([(key(start), 0)]);
    let mut open = BinaryHeap::from([Reverse((h(&start.position())?, 0u32, 0usize))]);
    let mut expansions = 0;
    while let Some(Reverse((_, g, ix))) = open.pop() {
        let pose = nodes[ix].0;
        if best[&key(&pose)] != ix {
            continue;
        }
        if pose.position().distance(&goal) <= END_TOLERANCE {
            let mut actions = Vec::new();
            let mut k = ix;
            while nodes[k].1 != usize::MAX {
                actions.push(nodes[k].2);
                k = nodes[k].1;
            }
            actions.reverse();
            let mut out = CompiledPath { actions: Vec::new(), poses: Vec::new(), end: *start };
            let mut p = *start;
            for a in actions {
                out.poses.push(p);
                out.actions.push(a);
                p = env::step(map, &p, a).0;
            }
            out.end = p;
            return Some(out);
        }
        expansions += 1;
        if expansions > LATTICE_MAX_EXPANSIONS {
            return None;
        }
        for (action, cost) in
            [(MetaAction::MoveAhead, MOVE_COST), (MetaAction::RotateLeft, TURN_COST), (MetaAction::RotateRight, TURN_COST)]
        {
            let (next, events) = env::step(map, &pose, action);
            if !events.is_empty() {
                continue;
            }
            let Some(hn) = h(&next.position()) else { continue };
            let gn = g + cost;
            let k = key(&next);
            if best.get(&k).is_some_and(|&j| nodes[j].3 <= gn) {
                continue;
            }
            best.insert(k, nodes.len());
            nodes.push((next, ix, action, gn));
            open.push(Reverse((gn + hn, gn, nodes.len() - 1)));
        }
    }
    None
}
