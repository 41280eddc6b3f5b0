use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geodesic::DistanceField;
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid map: {0}")]
    Validation(String),
    #[error("point ({x}, {y}) is outside the map")]
    OutOfBounds { x: f64, y: f64 },
}

/// Grid cell index. `row` grows with the line number of the map file,
/// `col` with the character position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Immutable 2D occupancy world.
///
/// Cell `(row, col)` covers `x ∈ [col·res, (col+1)·res)` and
/// `y ∈ [row·res, (row+1)·res)`; positions and targets are in meters.
#[derive(Debug)]
pub struct GridMap {
    name: String,
    width: usize,
    height: usize,
    resolution: f64,
    occupied: Vec<bool>,
    targets: Vec<Point>,
    starts: Vec<Point>,
    boundary: Vec<Cell>,
    target_field: OnceLock<DistanceField>,
}

impl Clone for GridMap {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            width: self.width,
            height: self.height,
            resolution: self.resolution,
            occupied: self.occupied.clone(),
            targets: self.targets.clone(),
            starts: self.starts.clone(),
            boundary: self.boundary.clone(),
            target_field: OnceLock::new(),
        }
    }
}

impl PartialEq for GridMap {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.width == other.width
            && self.height == other.height
            && self.resolution == other.resolution
            && self.occupied == other.occupied
            && self.targets == other.targets
            && self.starts == other.starts
    }
}

pub const DEFAULT_RESOLUTION: f64 = 0.1;

impl GridMap {
    /// Builds and validates a map. `occupied` is row-major, `height` rows of
    /// `width` cells.
    pub fn new(
        name: impl Into<String>,
        width: usize,
        height: usize,
        resolution: f64,
        occupied: Vec<bool>,
        targets: Vec<Point>,
        starts: Vec<Point>,
    ) -> Result<Self, MapError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::Validation(format!("resolution must be positive, got {resolution}")));
        }
        if width < 3 || height < 3 {
            return Err(MapError::Validation(format!("map must be at least 3x3, got {width}x{height}")));
        }
        if occupied.len() != width * height {
            return Err(MapError::Validation("occupancy size does not match dimensions".into()));
        }
        if occupied.iter().all(|&o| o) {
            return Err(MapError::Validation("map has no free cells".into()));
        }
        if targets.is_empty() {
            return Err(MapError::Validation("map has no target".into()));
        }
        let mut map = Self {
            name: name.into(),
            width,
            height,
            resolution,
            occupied,
            targets,
            starts,
            boundary: Vec::new(),
            target_field: OnceLock::new(),
        };
        for (kind, points) in [("target", &map.targets), ("start", &map.starts)] {
            for p in points {
                match map.cell_of(p) {
                    Some(c) if map.is_free(c) => {}
                    Some(c) => {
                        return Err(MapError::Validation(format!("{kind} at {c} lies on an obstacle")))
                    }
                    None => {
                        return Err(MapError::Validation(format!(
                            "{kind} at ({}, {}) is out of bounds",
                            p.x, p.y
                        )))
                    }
                }
            }
        }
        map.boundary = map.compute_boundary();
        Ok(map)
    }

    fn compute_boundary(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let c = Cell::new(row, col);
                if !self.is_free(c) {
                    continue;
                }
                let on_edge = row == 0 || col == 0 || row + 1 == self.height || col + 1 == self.width;
                if on_edge || self.neighbors4(c).any(|n| !self.is_free(n)) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Parses the ASCII map format: a `resolution <meters>` header followed by
    /// rows of `#` (obstacle), `.` (free), `T` (target) and `S` (start).
    pub fn from_ascii(name: impl Into<String>, text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(MapError::Parse { line: 1, message: "empty map file".into() })?;
        let header = header.trim_end_matches('\r');
        let resolution = header
            .strip_prefix("resolution")
            .map(str::trim)
            .ok_or(MapError::Parse { line: 1, message: "expected `resolution <meters>`".into() })?
            .parse::<f64>()
            .map_err(|e| MapError::Parse { line: 1, message: format!("bad resolution: {e}") })?;

        let mut rows: Vec<(usize, &str)> = lines.map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).collect();
        while rows.last().is_some_and(|(_, l)| l.is_empty()) {
            rows.pop();
        }
        if rows.is_empty() {
            return Err(MapError::Parse { line: 2, message: "no grid rows".into() });
        }
        let width = rows[0].1.chars().count();
        let height = rows.len();
        let mut occupied = Vec::with_capacity(width * height);
        let mut targets = Vec::new();
        let mut starts = Vec::new();
        for (row, (line_no, line)) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(MapError::Parse {
                    line: *line_no,
                    message: format!("row has {} cells, expected {width}", line.chars().count()),
                });
            }
            for (col, ch) in line.chars().enumerate() {
                let center = Point::new((col as f64 + 0.5) * resolution, (row as f64 + 0.5) * resolution);
                match ch {
                    '#' => occupied.push(true),
                    '.' => occupied.push(false),
                    'T' => {
                        occupied.push(false);
                        targets.push(center);
                    }
                    'S' => {
                        occupied.push(false);
                        starts.push(center);
                    }
                    other => {
                        return Err(MapError::Parse {
                            line: *line_no,
                            message: format!("unexpected character {other:?}"),
                        })
                    }
                }
            }
        }
        Self::new(name, width, height, resolution, occupied, targets, starts)
    }

    /// Renders the map back to the ASCII format. Targets and starts must sit
    /// on cell centers to survive a round trip.
    pub fn to_ascii(&self) -> String {
        let mut grid: Vec<Vec<char>> = (0..self.height)
            .map(|r| {
                (0..self.width)
                    .map(|c| if self.is_free(Cell::new(r, c)) { '.' } else { '#' })
                    .collect()
            })
            .collect();
        for s in &self.starts {
            if let Some(c) = self.cell_of(s) {
                grid[c.row][c.col] = 'S';
            }
        }
        for t in &self.targets {
            if let Some(c) = self.cell_of(t) {
                grid[c.row][c.col] = 'T';
            }
        }
        let mut out = format!("resolution {}\n", self.resolution);
        for row in grid {
            out.extend(row);
            out.push('\n');
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// The target set `G`.
    pub fn targets(&self) -> &[Point] {
        &self.targets
    }

    pub fn starts(&self) -> &[Point] {
        &self.starts
    }

    /// Free cells 4-adjacent to an obstacle or to the map edge.
    pub fn boundary(&self) -> &[Cell] {
        &self.boundary
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.row * self.width + c.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn in_bounds(&self, p: &Point) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x < self.width as f64 * self.resolution
            && p.y < self.height as f64 * self.resolution
    }

    pub fn cell_of(&self, p: &Point) -> Option<Cell> {
        if !self.in_bounds(p) {
            return None;
        }
        let col = ((p.x / self.resolution).floor() as usize).min(self.width - 1);
        let row = ((p.y / self.resolution).floor() as usize).min(self.height - 1);
        Some(Cell::new(row, col))
    }

    pub fn require_cell(&self, p: &Point) -> Result<Cell, MapError> {
        self.cell_of(p).ok_or(MapError::OutOfBounds { x: p.x, y: p.y })
    }

    pub fn center(&self, c: Cell) -> Point {
        Point::new((c.col as f64 + 0.5) * self.resolution, (c.row as f64 + 0.5) * self.resolution)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.row < self.height && c.col < self.width && !self.occupied[self.index(c)]
    }

    /// True when `p` is inside the map on a free cell.
    pub fn is_free_point(&self, p: &Point) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count()).map(|i| self.cell_at(i)).filter(|&c| self.is_free(c))
    }

    pub fn neighbors4(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const D: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        D.iter().filter_map(move |&(dr, dc)| self.offset(c, dr, dc))
    }

    /// Free 8-neighbors of `c`. A diagonal move is allowed only when both
    /// orthogonal cells it passes between are free.
    pub fn neighbors8(&self, c: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const D: [(isize, isize); 8] =
            [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
        D.iter().filter_map(move |&(dr, dc)| {
            let n = self.offset(c, dr, dc)?;
            if !self.is_free(n) {
                return None;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal {
                let a = self.offset(c, dr, 0)?;
                let b = self.offset(c, 0, dc)?;
                if !self.is_free(a) || !self.is_free(b) {
                    return None;
                }
            }
            Some((n, diagonal))
        })
    }

    fn offset(&self, c: Cell, dr: isize, dc: isize) -> Option<Cell> {
        let r = c.row.checked_add_signed(dr)?;
        let col = c.col.checked_add_signed(dc)?;
        (r < self.height && col < self.width).then_some(Cell::new(r, col))
    }

    /// Geodesic distance field to the nearest target, built on first use.
    pub fn target_field(&self) -> &DistanceField {
        self.target_field.get_or_init(|| {
            let sources: Vec<Cell> = self.targets.iter().filter_map(|t| self.cell_of(t)).collect();
            DistanceField::from_sources(self, &sources)
        })
    }

    /// Geodesic distance from `p` to the closest target, in meters.
    pub fn distance_to_targets(&self, p: &Point) -> f64 {
        match self.cell_of(p) {
            Some(c) => self.target_field().meters(self, c),
            None => f64::INFINITY,
        }
    }
}

/// Parses a map file body with a placeholder name.
pub fn load_map(text: &str) -> Result<GridMap, MapError> {
    GridMap::from_ascii("map", text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_free_3x3_has_eight_boundary_cells() {
        let map = load_map("resolution 0.1\n...\n.T.\n...\n").unwrap();
        assert_eq!(map.boundary().len(), 8);
        assert!(!map.boundary().contains(&Cell::new(1, 1)));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = load_map("resolution 0.1\n....\n.T.\n....\n").unwrap_err();
        assert!(matches!(err, MapError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(load_map("resolution 0.1\n###\n###\n###\n"), Err(MapError::Validation(_))));
        assert!(matches!(load_map("resolution 0.1\n...\n...\n...\n"), Err(MapError::Validation(_))));
        assert!(matches!(load_map("resolution 0\n...\n.T.\n...\n"), Err(MapError::Validation(_))));
        assert!(matches!(load_map("resolution x\n...\n.T.\n...\n"), Err(MapError::Parse { line: 1, .. })));
        assert!(matches!(load_map("resolution 0.1\n..\n.T\n"), Err(MapError::Validation(_))));
        assert!(matches!(load_map("resolution 0.1\n...\n.X.\n...\n"), Err(MapError::Parse { line: 3, .. })));
    }

    #[test]
    fn ascii_round_trip() {
        let text = "resolution 0.1\n#####\n#S..#\n#.#T#\n#####\n";
        let map = GridMap::from_ascii("m", text).unwrap();
        assert_eq!(map.to_ascii(), text);
        assert_eq!(map.targets().len(), 1);
        assert_eq!(map.starts().len(), 1);
        assert_eq!(map.cell_of(&map.targets()[0]), Some(Cell::new(2, 3)));
    }

    #[test]
    fn corner_cutting_is_forbidden() {
        let map = load_map("resolution 0.1\n...\n.#.\n..T\n").unwrap();
        let n: Vec<_> = map.neighbors8(Cell::new(0, 0)).collect();
        assert!(n.iter().all(|(c, _)| *c != Cell::new(1, 1)));
        let n: Vec<_> = map.neighbors8(Cell::new(1, 0)).map(|(c, _)| c).collect();
        assert!(!n.contains(&Cell::new(0, 1)), "diagonal past the obstacle corner");
        assert!(!n.contains(&Cell::new(2, 1)));
    }
}
