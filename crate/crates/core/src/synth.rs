//! Trajectory synthesis by random walks over the mobility model.

use rand::Rng;
use rayon::prelude::*;

use crate::curator::{LengthDistribution, MobilityModel};
use crate::error::{Error, Result};
use crate::grid::{CellId, CellTrajectory, Grid, Point, RawTrajectory};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub alpha: f64,
    pub beta: f64,
    pub target_count: usize,
    pub seed: u64,
}

impl SynthesisConfig {
    pub fn new(alpha: f64, beta: f64, target_count: usize, seed: u64) -> Result<Self> {
        let config = SynthesisConfig {
            alpha,
            beta,
            target_count,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid(format!(
                "reweighting coefficients must be non-negative, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.target_count == 0 {
            return Err(Error::invalid("target count must be at least 1"));
        }
        Ok(())
    }

    /// Factor applied to the end probability when choosing position `step`.
    pub fn termination_multiplier(&self, step: usize) -> f64 {
        self.alpha + self.beta * step as f64
    }
}

/// A row with its end entry scaled by the termination multiplier (capped at
/// 1) and the remaining entries rescaled proportionally to fill the rest.
///
/// Returns the row unchanged in shape; a row with no mass outside the end
/// entry terminates with certainty.
pub fn reweight_row(row: &[f64], multiplier: f64) -> Vec<f64> {
    let last = row.len() - 1;
    let p_end = row[last];
    let rest = 1.0 - p_end;
    let mut out = row.to_vec();
    if rest <= 0.0 {
        out.iter_mut().for_each(|p| *p = 0.0);
        out[last] = 1.0;
        return out;
    }
    let adjusted = (p_end * multiplier).min(1.0);
    let scale = (1.0 - adjusted) / rest;
    out[..last].iter_mut().for_each(|p| *p *= scale);
    out[last] = adjusted;
    out
}

fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    let total = cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u * total).min(cdf.len() - 1)
}

/// Precomputed sampling state for one model.
#[derive(Debug, Clone)]
pub struct Synthesizer<'a> {
    model: &'a MobilityModel,
    length_cdf: Vec<f64>,
    config: SynthesisConfig,
}

impl<'a> Synthesizer<'a> {
    pub fn new(length_dist: &LengthDistribution, model: &'a MobilityModel, config: SynthesisConfig) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        let mut acc = 0.0;
        let length_cdf = length_dist
            .probabilities()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Synthesizer {
            model,
            length_cdf,
            config,
        })
    }

    pub fn sample_length<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_cdf(&self.length_cdf, rng.random::<f64>()) + 1
    }

    /// Samples a length cap, then walks from a sampled start until the
    /// virtual end is drawn or the cap is reached.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CellTrajectory {
        let cap = self.sample_length(rng);
        self.walk(cap, rng)
    }

    pub fn walk<R: Rng + ?Sized>(&self, cap: usize, rng: &mut R) -> CellTrajectory {
        let grid = self.model.grid();
        let start = grid.cell_at(sample_cdf(self.model.start_cdf(), rng.random::<f64>()));
        let mut cells = vec![start];
        for step in 2..=cap {
            let current = cells[cells.len() - 1];
            match self.next_cell(current, step, rng) {
                Some(next) => cells.push(next),
                None => break,
            }
        }
        CellTrajectory::new(cells).expect("walk moves between adjacent cells")
    }

    fn next_cell<R: Rng + ?Sized>(&self, current: CellId, step: usize, rng: &mut R) -> Option<CellId> {
        let row = self.model.row(current);
        let successors = self.model.successors(current);
        let last = row.len() - 1;
        let p_end = row[last];
        let rest = 1.0 - p_end;
        if rest <= 0.0 || successors.is_empty() {
            return None;
        }
        let adjusted = (p_end * self.config.termination_multiplier(step)).min(1.0);
        let u: f64 = rng.random();
        if u < adjusted {
            return None;
        }
        let scale = (1.0 - adjusted) / rest;
        let mut acc = adjusted;
        let mut chosen = None;
        for (j, &p) in row[..last].iter().enumerate() {
            if p > 0.0 {
                acc += p * scale;
                chosen = Some(j);
                if u < acc {
                    break;
                }
            }
        }
        chosen.map(|j| successors[j])
    }
}

pub fn synthesize_one<R: Rng + ?Sized>(
    length_dist: &LengthDistribution,
    model: &MobilityModel,
    config: &SynthesisConfig,
    rng: &mut R,
) -> Result<CellTrajectory> {
    Ok(Synthesizer::new(length_dist, model, *config)?.sample(rng))
}

/// Exactly `config.target_count` trajectories; trajectory `i` draws from its
/// own stream of `config.seed`.
pub fn synthesize_dataset(
    length_dist: &LengthDistribution,
    model: &MobilityModel,
    config: &SynthesisConfig,
) -> Result<Vec<CellTrajectory>> {
    let synth = Synthesizer::new(length_dist, model, *config)?;
    let streams = SeedStream::new(config.seed);
    Ok((0..config.target_count as u64)
        .into_par_iter()
        .map(|i| synth.sample(&mut streams.rng(i)))
        .collect())
}

/// One uniformly placed point inside each cell of `traj`.
pub fn realize<R: Rng + ?Sized>(grid: &Grid, traj: &CellTrajectory, rng: &mut R) -> RawTrajectory {
    let b = grid.bbox();
    let points = traj
        .cells()
        .iter()
        .map(|&cell| {
            let p = Point::new(
                b.min_x + (cell.col as f64 + rng.random::<f64>()) * grid.cell_width(),
                b.min_y + (cell.row as f64 + rng.random::<f64>()) * grid.cell_height(),
            );
            // Rounding can land exactly on the far edge of the cell.
            match grid.locate(p) {
                Ok(c) if c == cell => p,
                _ => grid.cell_center(cell),
            }
        })
        .collect();
    RawTrajectory::new(String::new(), points)
}

/// Realizes a corpus with per-trajectory streams; ids are the positions.
pub fn realize_all(grid: &Grid, trajs: &[CellTrajectory], streams: SeedStream) -> Vec<RawTrajectory> {
    trajs
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut raw = realize(grid, t, &mut streams.rng(i as u64));
            raw.id = i.to_string();
            raw
        })
        .collect()
}
