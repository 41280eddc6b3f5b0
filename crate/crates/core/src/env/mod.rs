//! Deterministic occupancy-grid world: maps, kinematics, observations and
//! distance queries.

mod generate;
mod geodesic;
mod map;
mod motion;
mod observe;

pub use generate::{generate_map, GenerateError, MapGenSpec, MAX_ATTEMPTS, MAX_DENSITY};
pub use geodesic::{geodesic_distance, DistanceField, OctileCost};
pub use map::{load_map, Cell, GridMap, MapError, DEFAULT_RESOLUTION};
pub use motion::{
    step, sweep_is_free, Event, Heading, MetaAction, Pose, StagnationKind, MOVE_DISTANCE, ROTATE_DEGREES,
};
pub use observe::{
    in_view_cone, line_of_sight, observe, observe_with_range, panoramic, panoramic_with_range, Observation,
    PanoramicScan, DEFAULT_VIEW_RANGE, HALF_FOV_DEGREES,
};
