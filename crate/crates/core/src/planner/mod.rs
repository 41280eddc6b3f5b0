//! Grid shortest paths, path-to-action compilation and optimal operation
//! time.

mod astar;
mod compile;

use thiserror::Error;

use crate::env::{Cell, GridMap, MapError, MetaAction, Pose};
use crate::metrics::TimeModel;
use crate::{Point, Scalar};

pub use astar::{astar, astar_cells, CellPath};
pub use compile::{
    aligned_heading, compile_from, path_to_actions, rotations, CompiledPath, ARRIVAL_RADIUS, END_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path from {from} to {to}")]
    NoPath { from: Cell, to: Cell },
    #[error("path is empty")]
    EmptyPath,
    #[error("action compiler stuck at ({x:.3}, {y:.3})")]
    Stuck { x: f64, y: f64 },
    #[error("no target is reachable")]
    Unreachable,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Shortest path from `start` to the nearest (geodesic) target, compiled
/// from the start pose.
pub fn plan_to_nearest(map: &GridMap, start: &Pose, targets: &[Point]) -> Result<(CellPath, CompiledPath), PlanError> {
    let from = map.require_cell(&start.position())?;
    let mut best: Option<CellPath> = None;
    for t in targets {
        let to = map.require_cell(t)?;
        match astar_cells(map, from, to) {
            Ok(p) if best.as_ref().is_none_or(|b| p.cost < b.cost) => best = Some(p),
            Ok(_) | Err(PlanError::NoPath { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let path = best.ok_or(PlanError::Unreachable)?;
    let compiled = compile_from(map, &path, start)?;
    Ok((path, compiled))
}

/// Physical time of the compiled shortest path from `start` to the nearest
/// cell within geodesic distance `radius` of a target, followed by a stop.
/// Ties between equally near cells go to the lowest row-major index.
pub fn optimal_success_time<T: Scalar>(map: &GridMap, start: &Pose, radius: f64, tm: &TimeModel<T>) -> Result<T, PlanError> {
    let from = map.require_cell(&start.position())?;
    let to_targets = map.target_field();
    let reach = crate::env::DistanceField::from_sources(map, &[from]);
    let goal = map
        .free_cells()
        .filter(|&c| to_targets.meters(map, c) <= radius)
        .filter_map(|c| reach.cost(map, c).map(|d| (d, c)))
        .min_by(|a, b| a.0.cmp(&b.0))
        .ok_or(PlanError::Unreachable)?
        .1;
    let path = astar_cells(map, from, goal)?;
    let compiled = compile_from(map, &path, start)?;
    Ok(tm.physical_time(compiled.actions.iter().copied().chain([MetaAction::End])))
}

/// Minimum over targets of the physical time of the compiled shortest path
/// followed by a stop. No observations are included.
pub fn optimal_time<T: Scalar>(map: &GridMap, start: &Pose, targets: &[Point], tm: &TimeModel<T>) -> Result<T, PlanError> {
    let from = map.require_cell(&start.position())?;
    let mut best: Option<T> = None;
    for t in targets {
        let to = map.require_cell(t)?;
        let path = match astar_cells(map, from, to) {
            Ok(p) => p,
            Err(PlanError::NoPath { .. }) => continue,
            Err(e) => return Err(e),
        };
        let compiled = compile_from(map, &path, start)?;
        let time = tm.physical_time(compiled.actions.iter().copied().chain([MetaAction::End]));
        if best.is_none_or(|b| time < b) {
            best = Some(time);
        }
    }
    best.ok_or(PlanError::Unreachable)
}
