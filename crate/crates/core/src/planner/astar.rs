use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::env::{Cell, GridMap, OctileCost};
use crate::Point;

use super::PlanError;

/// An 8-connected chain of free cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPath {
    pub cells: Vec<Cell>,
    pub cost: OctileCost,
    /// `cost × resolution`.
    pub length_m: f64,
}

impl CellPath {
    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn goal(&self) -> Cell {
        *self.cells.last().expect("paths are non-empty")
    }
}

/// A* between the cells containing `p` and `q` under the octile heuristic.
pub fn astar(map: &GridMap, p: &Point, q: &Point) -> Result<CellPath, PlanError> {
    let from = map.require_cell(p)?;
    let to = map.require_cell(q)?;
    astar_cells(map, from, to)
}

pub fn astar_cells(map: &GridMap, from: Cell, to: Cell) -> Result<CellPath, PlanError> {
    if !map.is_free(from) || !map.is_free(to) {
        return Err(PlanError::NoPath { from, to });
    }
    let n = map.cell_count();
    let mut g: Vec<Option<OctileCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let start = map.index(from);
    let goal = map.index(to);
    g[start] = Some(OctileCost::ZERO);
    open.push(Reverse((OctileCost::octile(from, to), OctileCost::ZERO, start)));

    while let Some(Reverse((_, cost, i))) = open.pop() {
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if i == goal {
            let mut cells = vec![map.cell_at(i)];
            let mut cur = i;
            while cur != start {
                cur = parent[cur];
                cells.push(map.cell_at(cur));
            }
            cells.reverse();
            return Ok(CellPath { cells, cost, length_m: cost.cells() * map.resolution() });
        }
        for (nb, diagonal) in map.neighbors8(map.cell_at(i)) {
            let j = map.index(nb);
            if closed[j] {
                continue;
            }
            let step = if diagonal { OctileCost::DIAGONAL } else { OctileCost::STRAIGHT };
            let ng = cost + step;
            if g[j].is_none_or(|old| ng < old) {
                g[j] = Some(ng);
                parent[j] = i;
                open.push(Reverse((ng + OctileCost::octile(nb, to), ng, j)));
            }
        }
    }
    Err(PlanError::NoPath { from, to })
}
