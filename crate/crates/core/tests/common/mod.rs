//! Independent reference implementations and fixtures shared by the
//! integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use navsynth::env::{GridMap, MetaAction, Pose};
use navsynth::Point;
use rand::Rng;

pub const EPS: f64 = 1e-9;

/// Random map with independently placed obstacle cells and 1..=3 targets on
/// free cells.
pub fn random_map(r: &mut impl Rng, max_side: usize, density: f64) -> GridMap {
    loop {
        let w = r.gen_range(3..=max_side);
        let h = r.gen_range(3..=max_side);
        let occupied: Vec<bool> = (0..w * h).map(|_| r.gen_bool(density)).collect();
        let free: Vec<usize> = (0..w * h).filter(|&i| !occupied[i]).collect();
        if free.len() < 2 {
            continue;
        }
        let n = r.gen_range(1..=3.min(free.len()));
        let targets = (0..n)
            .map(|_| {
                let i = free[r.gen_range(0..free.len())];
                Point::new(((i % w) as f64 + 0.5) * 0.1, ((i / w) as f64 + 0.5) * 0.1)
            })
            .collect();
        return GridMap::new("random", w, h, 0.1, occupied, targets, Vec::new()).unwrap();
    }
}

pub fn free_cell_centers(map: &GridMap) -> Vec<Point> {
    let res = map.resolution();
    let mut out = Vec::new();
    for row in 0..map.height() {
        for col in 0..map.width() {
            if is_free(map, row as i64, col as i64) {
                out.push(Point::new((col as f64 + 0.5) * res, (row as f64 + 0.5) * res));
            }
        }
    }
    out
}

fn is_free(map: &GridMap, row: i64, col: i64) -> bool {
    row >= 0
        && col >= 0
        && (row as usize) < map.height()
        && (col as usize) < map.width()
        && map.is_free(navsynth::env::Cell::new(row as usize, col as usize))
}

fn cell_of(map: &GridMap, p: &Point) -> (i64, i64) {
    ((p.y / map.resolution()).floor() as i64, (p.x / map.resolution()).floor() as i64)
}

#[derive(PartialEq)]
struct Entry(f64, usize);
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Plain floating-point Dijkstra over free cells with unit straight and √2
/// diagonal steps; diagonals need both adjacent orthogonal cells free.
/// Returns meters from the nearest source to every cell.
pub fn dijkstra(map: &GridMap, sources: &[Point]) -> Vec<f64> {
    let w = map.width() as i64;
    let mut dist = vec![f64::INFINITY; map.cell_count()];
    let mut heap = BinaryHeap::new();
    for s in sources {
        let (r, c) = cell_of(map, s);
        if is_free(map, r, c) {
            let i = (r * w + c) as usize;
            dist[i] = 0.0;
            heap.push(Entry(0.0, i));
        }
    }
    while let Some(Entry(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let (r, c) = (i as i64 / w, i as i64 % w);
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                if (dr, dc) == (0, 0) || !is_free(map, r + dr, c + dc) {
                    continue;
                }
                let diagonal = dr != 0 && dc != 0;
                if diagonal && !(is_free(map, r + dr, c) && is_free(map, r, c + dc)) {
                    continue;
                }
                let nd = d + if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
                let j = ((r + dr) * w + c + dc) as usize;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Entry(nd, j));
                }
            }
        }
    }
    dist.iter().map(|d| d * map.resolution()).collect()
}

/// Geodesic meters from `p` to the nearest target, from a precomputed field.
pub fn field_at(map: &GridMap, field: &[f64], p: &Point) -> f64 {
    let (r, c) = cell_of(map, p);
    if !is_free(map, r, c) {
        return f64::INFINITY;
    }
    field[(r * map.width() as i64 + c) as usize]
}

/// Smallest `k ≤ t − t_stag` with `‖p_t − p_k‖ ≤ δ`, by direct scan.
pub fn brute_repetitive(trace: &[Point], t: usize, t_stag: usize, delta: f64) -> Option<usize> {
    if t < t_stag {
        return None;
    }
    let mut found = None;
    for k in (0..=t - t_stag).rev() {
        let (dx, dy) = (trace[t].x - trace[k].x, trace[t].y - trace[k].y);
        if (dx * dx + dy * dy).sqrt() <= delta {
            found = Some(k);
        }
    }
    found
}

/// `dist(p_t) > dist(p_{t−Δt})` with geodesics from an independent field.
pub fn brute_no_progress(map: &GridMap, field: &[f64], trace: &[Point], t: usize, dt: usize) -> bool {
    let now = field_at(map, field, &trace[t]);
    let before = field_at(map, field, &trace[t - dt]);
    if now.is_infinite() || before.is_infinite() {
        return now > before;
    }
    now > before + EPS
}

/// Free cells of `map` on the edge of the grid or 4-adjacent to an obstacle.
pub fn boundary_points(map: &GridMap) -> Vec<Point> {
    let res = map.resolution();
    let mut out = Vec::new();
    for row in 0..map.height() as i64 {
        for col in 0..map.width() as i64 {
            if !is_free(map, row, col) {
                continue;
            }
            let edge = row == 0 || col == 0 || row + 1 == map.height() as i64 || col + 1 == map.width() as i64;
            let touches = [(0, 1), (1, 0), (0, -1), (-1, 0)].iter().any(|(dr, dc)| !is_free(map, row + dr, col + dc));
            if edge || touches {
                out.push(Point::new((col as f64 + 0.5) * res, (row as f64 + 0.5) * res));
            }
        }
    }
    out
}

/// Direct evaluation of the waypoint score terms over explicit boundary
/// and target sets.
pub fn brute_score(
    boundary: &[Point],
    targets: &[Point],
    p: &Point,
    p_init: &Point,
    p_target: &Point,
    lambda: f64,
) -> (f64, f64, f64) {
    let d = |a: &Point, b: &Point| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let lo = boundary.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min);
    let hi = boundary.iter().map(|q| d(p, q)).fold(0.0, f64::max);
    let scale = targets.iter().map(|q| d(p_init, q)).fold(0.0, f64::max);
    let s = lo / hi;
    let c = 1.0 - d(p, p_target) / scale;
    (s, c, s + lambda * c)
}

/// Exhaustive top-2: score every reachable cell center, take the best
/// (lowest row-major index within 1e-12), then the best strictly farther
/// than `radius` (+1e-9) from it, else the global second best, else the
/// same point.
pub fn brute_top2(map: &GridMap, p_init: &Point, p_target: &Point, lambda: f64, radius: f64) -> Option<(Point, Point)> {
    let boundary = boundary_points(map);
    let reach = dijkstra(map, &[*p_init]);
    let cands: Vec<(Point, f64)> = free_cell_centers(map)
        .into_iter()
        .filter(|p| field_at(map, &reach, p).is_finite())
        .map(|p| {
            let s = brute_score(&boundary, map.targets(), &p, p_init, p_target, lambda).2;
            (p, s)
        })
        .collect();
    let pick = |idx: &[usize]| -> Option<usize> {
        let max = idx.iter().map(|&i| cands[i].1).fold(f64::NEG_INFINITY, f64::max);
        idx.iter().copied().find(|&i| cands[i].1 >= max - 1e-12)
    };
    let all: Vec<usize> = (0..cands.len()).collect();
    let i1 = pick(&all)?;
    let p1 = cands[i1].0;
    let far: Vec<usize> = all.iter().copied().filter(|&i| cands[i].0.distance(&p1) > radius + 1e-9).collect();
    let rest: Vec<usize> = all.iter().copied().filter(|&i| i != i1).collect();
    let i2 = pick(&far).or_else(|| pick(&rest)).unwrap_or(i1);
    Some((p1, cands[i2].0))
}

/// Random walk of random meta actions from a random free cell center.
pub fn random_walk(map: &GridMap, r: &mut impl Rng, len: usize) -> Vec<Point> {
    let free = free_cell_centers(map);
    let heading = navsynth::env::Heading::new(r.gen_range(0..12u16) * 30).unwrap();
    let mut pose = Pose::at(free[r.gen_range(0..free.len())], heading);
    let mut out = vec![pose.position()];
    for _ in 0..len {
        let action = match r.gen_range(0..10) {
            0..=5 => MetaAction::MoveAhead,
            6..=7 => MetaAction::RotateLeft,
            _ => MetaAction::RotateRight,
        };
        pose = navsynth::env::step(map, &pose, action).0;
        out.push(pose.position());
    }
    out
}

/// Orders `a + b·√2` values exactly using integer arithmetic.
pub fn cmp_octile(x: (u32, u32), y: (u32, u32)) -> Ordering {
    let da = x.0 as i64 - y.0 as i64;
    let db = y.1 as i64 - x.1 as i64;
    // sign of da − db·√2
    match (da.signum(), db.signum()) {
        (0, 0) => Ordering::Equal,
        (s, t) if s >= 0 && t <= 0 => Ordering::Greater,
        (s, t) if s <= 0 && t >= 0 => Ordering::Less,
        (1, 1) => (da * da).cmp(&(2 * db * db)),
        _ => (2 * db * db).cmp(&(da * da)),
    }
}

/// Dijkstra from the cell containing `source` that carries exact
/// (straight, diagonal) step counts. Array scan instead of a heap.
pub fn dijkstra_exact(map: &GridMap, source: &Point) -> Vec<Option<(u32, u32)>> {
    let w = map.width() as i64;
    let n = map.cell_count();
    let mut dist: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut done = vec![false; n];
    let (r0, c0) = cell_of(map, source);
    if !is_free(map, r0, c0) {
        return dist;
    }
    dist[(r0 * w + c0) as usize] = Some((0, 0));
    loop {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if done[i] || dist[i].is_none() {
                continue;
            }
            if best.is_none_or(|b| cmp_octile(dist[i].unwrap(), dist[b].unwrap()) == Ordering::Less) {
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        done[i] = true;
        let d = dist[i].unwrap();
        let (r, c) = (i as i64 / w, i as i64 % w);
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                if (dr, dc) == (0, 0) || !is_free(map, r + dr, c + dc) {
                    continue;
                }
                let diagonal = dr != 0 && dc != 0;
                if diagonal && !(is_free(map, r + dr, c) && is_free(map, r, c + dc)) {
                    continue;
                }
                let nd = if diagonal { (d.0, d.1 + 1) } else { (d.0 + 1, d.1) };
                let j = ((r + dr) * w + c + dc) as usize;
                if dist[j].is_none_or(|old| cmp_octile(nd, old) == Ordering::Less) {
                    dist[j] = Some(nd);
                }
            }
        }
    }
    dist
}
