use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geodesic::DistanceField;
use super::map::{Cell, GridMap, MapError, DEFAULT_RESOLUTION};
use crate::rng;

pub const MAX_DENSITY: f64 = 0.5;
pub const MAX_ATTEMPTS: u64 = 64;

/// Random block-obstacle map layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapGenSpec {
    pub width: usize,
    pub height: usize,
    /// Fraction of interior obstacle blocks, in `[0, 0.5]`.
    pub density: f64,
    pub resolution: f64,
    pub targets: usize,
    /// Obstacles are `block × block` cell squares on a coarse lattice.
    pub block: usize,
    pub seed: u64,
}

impl Default for MapGenSpec {
    fn default() -> Self {
        Self { width: 40, height: 40, density: 0.2, resolution: DEFAULT_RESOLUTION, targets: 2, block: 4, seed: 0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("no connected layout after {attempts} attempts")]
    GenerationExhausted { attempts: u64 },
    #[error(transparent)]
    Map(#[from] MapError),
}

impl MapGenSpec {
    pub fn validate(&self) -> Result<(), GenerateError> {
        let bad = |m: &str| Err(GenerateError::InvalidSpec(m.to_owned()));
        if !(0.0..=MAX_DENSITY).contains(&self.density) {
            return bad("density must lie in [0, 0.5]");
        }
        if self.block == 0 || self.width < self.block + 2 || self.height < self.block + 2 {
            return bad("map too small for its obstacle block size");
        }
        if self.targets == 0 {
            return bad("at least one target is required");
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        Ok(())
    }
}

/// Map `index` of the family described by `spec`. Free space is a single
/// connected region containing every target. Cells cut off from the targets
/// are filled in.
pub fn generate_map(spec: &MapGenSpec, index: usize) -> Result<GridMap, GenerateError> {
    spec.validate()?;
    let name = format!("gen-{}-{index}", spec.seed);
    let base = rng::derive_seed(spec.seed, "map", index as u64);
    for attempt in 0..MAX_ATTEMPTS {
        let mut r = rng::stream(rng::derive_seed(base, "attempt", attempt), "layout");
        if let Some(map) = try_layout(spec, &name, &mut r)? {
            return Ok(map);
        }
    }
    Err(GenerateError::GenerationExhausted { attempts: MAX_ATTEMPTS })
}

fn try_layout(spec: &MapGenSpec, name: &str, r: &mut impl Rng) -> Result<Option<GridMap>, GenerateError> {
    let (w, h, b) = (spec.width, spec.height, spec.block);
    let mut occupied = vec![false; w * h];
    for row in 0..h {
        for col in 0..w {
            if row == 0 || col == 0 || row + 1 == h || col + 1 == w {
                occupied[row * w + col] = true;
            }
        }
    }
    let (bw, bh) = ((w - 2) / b, (h - 2) / b);
    let mut blocks: Vec<(usize, usize)> = (0..bh).flat_map(|i| (0..bw).map(move |j| (i, j))).collect();
    blocks.shuffle(r);
    let n_blocked = (spec.density * blocks.len() as f64).round() as usize;
    for &(i, j) in &blocks[..n_blocked] {
        for row in 1 + i * b..1 + (i + 1) * b {
            for col in 1 + j * b..1 + (j + 1) * b {
                occupied[row * w + col] = true;
            }
        }
    }
    let mut free: Vec<Cell> =
        (0..h).flat_map(|row| (0..w).map(move |col| Cell::new(row, col))).filter(|c| !occupied[c.row * w + c.col]).collect();
    if free.len() < spec.targets {
        return Ok(None);
    }
    free.shuffle(r);
    let targets: Vec<Cell> = free[..spec.targets].to_vec();
    let res = spec.resolution;
    let points: Vec<_> =
        targets.iter().map(|c| crate::Point::new((c.col as f64 + 0.5) * res, (c.row as f64 + 0.5) * res)).collect();
    let probe = GridMap::new(name, w, h, res, occupied.clone(), points.clone(), Vec::new())?;
    let field = DistanceField::from_sources(&probe, &targets[..1]);
    if !targets.iter().all(|&t| field.reachable(&probe, t)) {
        return Ok(None);
    }
    for (i, o) in occupied.iter_mut().enumerate() {
        let c = Cell::new(i / w, i % w);
        if !*o && !field.reachable(&probe, c) {
            *o = true;
        }
    }
    Ok(Some(GridMap::new(name, w, h, spec.resolution, occupied, points, Vec::new())?))
}
