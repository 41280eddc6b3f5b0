use serde::{Deserialize, Serialize};

use super::map::{Cell, GridMap};
use super::motion::{Heading, Pose};
use crate::Point;

pub const DEFAULT_VIEW_RANGE: f64 = 5.0;
pub const HALF_FOV_DEGREES: f64 = 45.0;
const ANGLE_SLACK: f64 = 1e-9;

/// Symbolic stand-in for a camera frame: the cells and targets in view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub origin: Pose,
    /// Sorted by `(row, col)`.
    pub visible_cells: Vec<Cell>,
    /// Indices into the map's target list.
    pub visible_targets: Vec<usize>,
}

/// Four views at 90° spacing starting from the agent's heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramicScan {
    pub views: [Observation; 4],
}

impl PanoramicScan {
    pub fn headings(&self) -> [Heading; 4] {
        std::array::from_fn(|i| self.views[i].origin.heading)
    }
}

/// True when `cell` is within `range` meters of `origin` and within ±45° of
/// `heading`. The agent's own cell always qualifies.
pub fn in_view_cone(map: &GridMap, origin: &Point, heading: Heading, cell: Cell, range: f64) -> bool {
    if map.cell_of(origin) == Some(cell) {
        return true;
    }
    let c = map.center(cell);
    origin.distance(&c) <= range && heading.offset_from(origin.bearing_deg(&c)) <= HALF_FOV_DEGREES + ANGLE_SLACK
}

/// Occlusion test: walks every cell whose closed square meets the segment
/// from `origin` to the center of `target`. Any occupied cell other than
/// `target` blocks the line of sight. Passing exactly through a grid vertex
/// touches both side cells.
pub fn line_of_sight(map: &GridMap, origin: &Point, target: Cell) -> bool {
    let res = map.resolution();
    let (ox, oy) = (origin.x / res, origin.y / res);
    let (ex, ey) = (target.col as f64 + 0.5, target.row as f64 + 0.5);
    let (dx, dy) = (ex - ox, ey - oy);
    let Some(start) = map.cell_of(origin) else { return false };
    let (mut x, mut y) = (start.col as i64, start.row as i64);
    let (tx, ty) = (target.col as i64, target.row as i64);
    let step_x = if dx > 0.0 { 1 } else if dx < 0.0 { -1 } else { 0 };
    let step_y = if dy > 0.0 { 1 } else if dy < 0.0 { -1 } else { 0 };

    let blocked = |cx: i64, cy: i64| -> bool {
        if cx == tx && cy == ty {
            return false;
        }
        if cx < 0 || cy < 0 {
            return true;
        }
        !map.is_free(Cell::new(cy as usize, cx as usize))
    };
    // Parametric distance to the next vertical / horizontal grid line,
    // recomputed from integers so equal crossings compare equal.
    let t_next = |pos: i64, step: i64, o: f64, d: f64| -> f64 {
        match step {
            0 => f64::INFINITY,
            1 => ((pos + 1) as f64 - o) / d,
            _ => (pos as f64 - o) / d,
        }
    };

    let guard = (target.col.abs_diff(start.col) + target.row.abs_diff(start.row)) * 2 + 4;
    for _ in 0..guard {
        if x == tx && y == ty {
            return true;
        }
        if blocked(x, y) {
            return false;
        }
        let t_x = t_next(x, step_x, ox, dx);
        let t_y = t_next(y, step_y, oy, dy);
        if t_x == t_y {
            if blocked(x + step_x, y) || blocked(x, y + step_y) {
                return false;
            }
            x += step_x;
            y += step_y;
        } else if t_x < t_y {
            x += step_x;
        } else {
            y += step_y;
        }
    }
    x == tx && y == ty
}

/// Cells visible from `pose` within `range` and the 90° field of view.
pub fn observe_with_range(map: &GridMap, pose: &Pose, range: f64) -> Observation {
    let origin = pose.position();
    let res = map.resolution();
    let r_cells = (range / res).ceil() as i64 + 1;
    let Some(here) = map.cell_of(&origin) else {
        return Observation { origin: *pose, visible_cells: Vec::new(), visible_targets: Vec::new() };
    };
    let row_lo = (here.row as i64 - r_cells).max(0) as usize;
    let row_hi = ((here.row as i64 + r_cells) as usize).min(map.height() - 1);
    let col_lo = (here.col as i64 - r_cells).max(0) as usize;
    let col_hi = ((here.col as i64 + r_cells) as usize).min(map.width() - 1);

    let mut visible = Vec::new();
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let c = Cell::new(row, col);
            if in_view_cone(map, &origin, pose.heading, c, range) && line_of_sight(map, &origin, c) {
                visible.push(c);
            }
        }
    }
    let visible_targets = map
        .targets()
        .iter()
        .enumerate()
        .filter(|(_, t)| map.cell_of(t).is_some_and(|c| visible.binary_search(&c).is_ok()))
        .map(|(i, _)| i)
        .collect();
    Observation { origin: *pose, visible_cells: visible, visible_targets }
}

pub fn observe(map: &GridMap, pose: &Pose) -> Observation {
    observe_with_range(map, pose, DEFAULT_VIEW_RANGE)
}

/// Four views at `h, h+90, h+180, h+270`; the agent's heading is unchanged.
pub fn panoramic(map: &GridMap, pose: &Pose) -> PanoramicScan {
    panoramic_with_range(map, pose, DEFAULT_VIEW_RANGE)
}

pub fn panoramic_with_range(map: &GridMap, pose: &Pose, range: f64) -> PanoramicScan {
    let mut heading = pose.heading;
    let views = std::array::from_fn(|_| {
        let view = observe_with_range(map, &Pose { heading, ..*pose }, range);
        for _ in 0..3 {
            heading = heading.left();
        }
        view
    });
    PanoramicScan { views }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::load_map;

    #[test]
    fn closed_box_sees_only_its_neighborhood() {
        let map = load_map("resolution 0.1\n#####\n#####\n##T##\n#####\n#####\n").unwrap();
        let pose = Pose::new(0.25, 0.25, Heading::EAST);
        let obs = observe(&map, &pose);
        assert!(obs.visible_cells.contains(&Cell::new(2, 2)));
        for c in &obs.visible_cells {
            assert!(c.row.abs_diff(2) <= 1 && c.col.abs_diff(2) <= 1, "{c} beyond the box walls");
        }
        assert_eq!(obs.visible_targets, vec![0]);
    }

    #[test]
    fn panoramic_headings() {
        let map = load_map("resolution 0.1\n.....\n..T..\n.....\n").unwrap();
        let pose = Pose::new(0.25, 0.15, Heading::new(30).unwrap());
        let scan = panoramic(&map, &pose);
        let hs: Vec<u16> = scan.headings().iter().map(|h| h.degrees()).collect();
        assert_eq!(hs, vec![30, 120, 210, 300]);
    }

    #[test]
    fn wall_blocks_cells_behind_it() {
        let map = load_map("resolution 0.1\n.......\n.T.#...\n.......\n").unwrap();
        let pose = Pose::new(0.15, 0.15, Heading::EAST);
        let obs = observe(&map, &pose);
        assert!(obs.visible_cells.contains(&Cell::new(1, 3)), "the wall itself is seen");
        assert!(!obs.visible_cells.contains(&Cell::new(1, 5)));
    }
}
