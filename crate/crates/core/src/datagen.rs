//! Synthetic corpora of grid random walks with skewed endpoints.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Gamma, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{BoundingBox, CellId, Grid, Point, RawTrajectory};
use crate::rng::{SeedStream, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n: u32,
    pub bbox: BoundingBox,
    pub size: usize,
    /// Mean number of visited cells.
    pub mean_length: f64,
    /// Gamma shape of the length mixture; larger is closer to Poisson.
    pub dispersion: f64,
    pub max_length: Option<usize>,
    /// Weighted start cells; empty means uniform over the grid.
    pub start_hotspots: Vec<(CellId, f64)>,
    /// Weighted destination cells the walk drifts toward.
    pub end_hotspots: Vec<(CellId, f64)>,
    /// Probability of a step toward the destination rather than a random one.
    pub drift: f64,
    pub points_per_cell: usize,
    pub seed: u64,
}

impl GenConfig {
    /// A 6x6 unit-square corpus with two start and two end hotspots.
    pub fn new(size: usize, seed: u64) -> Self {
        GenConfig {
            n: 6,
            bbox: BoundingBox::unit(),
            size,
            mean_length: 8.0,
            dispersion: 4.0,
            max_length: None,
            start_hotspots: vec![(CellId::new(0, 0), 4.0), (CellId::new(4, 1), 2.0)],
            end_hotspots: vec![(CellId::new(5, 5), 3.0), (CellId::new(1, 4), 2.0)],
            drift: 0.7,
            points_per_cell: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = Grid::new(self.bbox, self.n)?;
        if self.size == 0 {
            return Err(Error::invalid("corpus size must be at least 1"));
        }
        if !(self.mean_length >= 1.0 && self.mean_length.is_finite()) {
            return Err(Error::invalid(format!(
                "mean length must be at least 1, got {}",
                self.mean_length
            )));
        }
        if !(self.dispersion > 0.0 && self.dispersion.is_finite()) {
            return Err(Error::invalid(format!(
                "dispersion must be positive, got {}",
                self.dispersion
            )));
        }
        if self.max_length == Some(0) {
            return Err(Error::invalid("maximum length must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.drift) {
            return Err(Error::invalid(format!("drift must be in [0, 1], got {}", self.drift)));
        }
        if self.points_per_cell == 0 {
            return Err(Error::invalid("points per cell must be at least 1"));
        }
        for (cell, w) in self.start_hotspots.iter().chain(&self.end_hotspots) {
            if !grid.contains_cell(*cell) {
                return Err(Error::invalid(format!(
                    "hotspot {cell} is outside the {0}x{0} grid",
                    self.n
                )));
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("hotspot {cell} has non-positive weight {w}")));
            }
        }
        Ok(())
    }
}

struct CellSampler {
    cells: Vec<CellId>,
    index: Option<WeightedIndex<f64>>,
}

impl CellSampler {
    fn new(hotspots: &[(CellId, f64)], grid: &Grid) -> Result<Self> {
        if hotspots.is_empty() {
            return Ok(CellSampler {
                cells: grid.cells().collect(),
                index: None,
            });
        }
        let index = WeightedIndex::new(hotspots.iter().map(|h| h.1))
            .map_err(|e| Error::invalid(format!("hotspot weights: {e}")))?;
        Ok(CellSampler {
            cells: hotspots.iter().map(|h| h.0).collect(),
            index: Some(index),
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CellId {
        match &self.index {
            Some(w) => self.cells[w.sample(rng)],
            None => self.cells[rng.random_range(0..self.cells.len())],
        }
    }
}

/// Deterministic corpus: trajectory `i` depends only on the seed and `i`.
pub fn generate_corpus(config: &GenConfig) -> Result<Vec<RawTrajectory>> {
    config.validate()?;
    let grid = Grid::new(config.bbox, config.n)?;
    let starts = CellSampler::new(&config.start_hotspots, &grid)?;
    let ends = CellSampler::new(&config.end_hotspots, &grid)?;
    // Length is 1 + Poisson(G) with G ~ Gamma(dispersion, (mean - 1) / dispersion).
    let extra = config.mean_length - 1.0;
    let gamma = if extra > 0.0 {
        Some(Gamma::new(config.dispersion, extra / config.dispersion).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let streams = SeedStream::new(config.seed);
    Ok((0..config.size)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(i as u64);
            let mut len = 1 + gamma.map_or(0, |g| {
                let rate = g.sample(&mut rng);
                if rate > 0.0 {
                    Poisson::new(rate).map_or(0, |p| p.sample(&mut rng) as usize)
                } else {
                    0
                }
            });
            if let Some(cap) = config.max_length {
                len = len.min(cap);
            }
            let cells = walk(
                &grid,
                starts.sample(&mut rng),
                ends.sample(&mut rng),
                len,
                config.drift,
                &mut rng,
            );
            let points = place_points(&grid, &cells, config.points_per_cell, &mut rng);
            RawTrajectory::new(format!("g{i}"), points)
        })
        .collect())
}

/// `len` cells starting at `start`, each step either toward `target` (with
/// probability `drift`) or to a uniformly chosen neighbor.
fn walk(grid: &Grid, start: CellId, target: CellId, len: usize, drift: f64, rng: &mut StreamRng) -> Vec<CellId> {
    let mut cells = Vec::with_capacity(len);
    cells.push(start);
    let mut current = start;
    while cells.len() < len {
        let neighbors: Vec<CellId> = grid.neighbors_unchecked(current).collect();
        if neighbors.is_empty() {
            break;
        }
        current = if current != target && rng.random::<f64>() < drift {
            let step = |a: u32, b: u32| (a as i64 + (b as i64 - a as i64).signum()) as u32;
            CellId::new(step(current.row, target.row), step(current.col, target.col))
        } else {
            neighbors[rng.random_range(0..neighbors.len())]
        };
        cells.push(current);
    }
    cells
}

/// Points jittered around cell centers, kept strictly inside their cell.
fn place_points(grid: &Grid, cells: &[CellId], per_cell: usize, rng: &mut StreamRng) -> Vec<Point> {
    let (w, h) = (grid.cell_width(), grid.cell_height());
    let mut points = Vec::with_capacity(cells.len() * per_cell);
    for &cell in cells {
        let c = grid.cell_center(cell);
        for _ in 0..per_cell {
            let p = Point::new(
                c.x + (rng.random::<f64>() - 0.5) * 0.9 * w,
                c.y + (rng.random::<f64>() - 0.5) * 0.9 * h,
            );
            points.push(p);
        }
    }
    points
}
