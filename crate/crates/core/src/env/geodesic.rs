use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::map::{Cell, GridMap, MapError};
use crate::Point;

/// Exact length of an 8-connected grid path, `straight + diagonal·√2` cells.
///
/// Ordering is exact: two costs compare by the sign of
/// `Δstraight + Δdiagonal·√2`, decided with integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub const ZERO: Self = Self { straight: 0, diagonal: 0 };
    pub const STRAIGHT: Self = Self { straight: 1, diagonal: 0 };
    pub const DIAGONAL: Self = Self { straight: 0, diagonal: 1 };

    /// Octile distance between two cells: an admissible, consistent A*
    /// heuristic for 8-connected unit/√2 costs.
    pub fn octile(a: Cell, b: Cell) -> Self {
        let dr = a.row.abs_diff(b.row) as u32;
        let dc = a.col.abs_diff(b.col) as u32;
        Self { straight: dr.max(dc) - dr.min(dc), diagonal: dr.min(dc) }
    }

    pub fn cells(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn steps(&self) -> u32 {
        self.straight + self.diagonal
    }
}

impl Add for OctileCost {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { straight: self.straight + rhs.straight, diagonal: self.diagonal + rhs.diagonal }
    }
}

impl Ord for OctileCost {
    fn cmp(&self, other: &Self) -> Ordering {
        let da = self.straight as i64 - other.straight as i64;
        let db = self.diagonal as i64 - other.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            // Opposite signs: compare |da| against |db|·√2 by squaring.
            (a, _) => {
                let lhs = da * da;
                let rhs = 2 * db * db;
                if a > 0 {
                    lhs.cmp(&rhs)
                } else {
                    rhs.cmp(&lhs)
                }
            }
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single- or multi-source shortest-path costs over the free cells.
#[derive(Debug, Clone)]
pub struct DistanceField {
    cost: Vec<Option<OctileCost>>,
}

impl DistanceField {
    pub fn from_sources(map: &GridMap, sources: &[Cell]) -> Self {
        let mut cost = vec![None; map.cell_count()];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if map.is_free(s) {
                cost[map.index(s)] = Some(OctileCost::ZERO);
                heap.push(Reverse((OctileCost::ZERO, map.index(s))));
            }
        }
        while let Some(Reverse((d, i))) = heap.pop() {
            if cost[i].is_some_and(|best| d > best) {
                continue;
            }
            for (n, diagonal) in map.neighbors8(map.cell_at(i)) {
                let step = if diagonal { OctileCost::DIAGONAL } else { OctileCost::STRAIGHT };
                let nd = d + step;
                let ni = map.index(n);
                if cost[ni].is_none_or(|old| nd < old) {
                    cost[ni] = Some(nd);
                    heap.push(Reverse((nd, ni)));
                }
            }
        }
        Self { cost }
    }

    pub fn cost(&self, map: &GridMap, c: Cell) -> Option<OctileCost> {
        self.cost[map.index(c)]
    }

    /// Distance in meters, infinite when unreachable.
    pub fn meters(&self, map: &GridMap, c: Cell) -> f64 {
        self.cost(map, c).map_or(f64::INFINITY, |d| d.cells() * map.resolution())
    }

    pub fn reachable(&self, map: &GridMap, c: Cell) -> bool {
        self.cost(map, c).is_some()
    }
}

/// Shortest 8-connected path length between the cells containing `p` and
/// `q`, in meters; infinite when disconnected or when either end is blocked.
pub fn geodesic_distance(map: &GridMap, p: &Point, q: &Point) -> Result<f64, MapError> {
    let a = map.require_cell(p)?;
    let b = map.require_cell(q)?;
    if a == b {
        return Ok(0.0);
    }
    if !map.is_free(a) || !map.is_free(b) {
        return Ok(f64::INFINITY);
    }
    Ok(DistanceField::from_sources(map, &[a]).meters(map, b))
}
