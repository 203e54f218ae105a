//! Re-identification and outlier attacks against a synthetic corpus.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CellId, Grid, Point, RawTrajectory};

pub const KAPPA_SWEEP: std::ops::RangeInclusive<usize> = 2..=10;

/// Dynamic time warping cost with Euclidean point distance.
pub fn dtw(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("dtw needs two non-empty point sequences"));
    }
    Ok(dtw_bounded(a, b, f64::INFINITY).expect("unbounded dtw always completes"))
}

/// DTW that gives up with `None` once every alignment must exceed `limit`.
pub fn dtw_bounded(a: &[Point], b: &[Point], limit: f64) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for p in a {
        cur[0] = f64::INFINITY;
        let mut row_min = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = p.distance(&b[j - 1]) + best;
            row_min = row_min.min(cur[j]);
        }
        if row_min > limit {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= limit).then_some(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// A target is defended when its matching set holds more than `kappa`
    /// trajectories.
    pub kappa: usize,
    pub theta_ratio: f64,
    pub delta_ratio: f64,
    pub zone: Vec<CellId>,
    pub outlier_fraction: f64,
}

impl AttackConfig {
    pub fn new(grid: &Grid) -> Self {
        AttackConfig {
            kappa: 2,
            theta_ratio: 0.2,
            delta_ratio: 0.25,
            zone: central_zone(grid),
            outlier_fraction: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta ratio", self.theta_ratio), ("delta ratio", self.delta_ratio)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        if !(self.outlier_fraction > 0.0 && self.outlier_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "outlier fraction must be in (0, 1], got {}",
                self.outlier_fraction
            )));
        }
        Ok(())
    }
}

/// The 2x2 block of cells at the center of the grid, or the single cell of
/// a 1x1 grid.
pub fn central_zone(grid: &Grid) -> Vec<CellId> {
    let n = grid.n();
    if n == 1 {
        return vec![CellId::new(0, 0)];
    }
    let r = (n - 1) / 2;
    vec![
        CellId::new(r, r),
        CellId::new(r, r + 1),
        CellId::new(r + 1, r),
        CellId::new(r + 1, r + 1),
    ]
}

/// The points of `traj` that fall in `zone`, in their original order.
pub fn restrict_to_zone(traj: &RawTrajectory, grid: &Grid, zone: &HashSet<CellId>) -> Vec<Point> {
    traj.points
        .iter()
        .filter(|p| grid.locate(**p).is_ok_and(|c| zone.contains(&c)))
        .copied()
        .collect()
}

/// Matching-set sizes of a set of attacks, one entry per target.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub matches: Vec<usize>,
    pub sim_max: f64,
    pub threshold: f64,
}

impl AttackOutcome {
    /// Fraction of targets whose matching set is larger than `kappa`.
    pub fn resilience(&self, kappa: usize) -> f64 {
        resilience_ratio(&self.matches, kappa)
    }

    pub fn sweep(&self) -> Vec<(usize, f64)> {
        KAPPA_SWEEP.map(|k| (k, self.resilience(k))).collect()
    }
}

pub fn resilience_ratio(matches: &[usize], kappa: usize) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    matches.iter().filter(|&&m| m > kappa).count() as f64 / matches.len() as f64
}

/// For every attacked trajectory that enters the zone, counts the synthetic
/// trajectories whose in-zone part lies within `theta_ratio * sim_max` DTW of
/// the target's in-zone part. `sim_max` is the largest DTW between in-zone
/// parts of the attacked trajectories.
pub fn reidentification_attack(
    syn: &[RawTrajectory],
    attacked: &[RawTrajectory],
    grid: &Grid,
    config: &AttackConfig,
) -> Result<AttackOutcome> {
    config.validate()?;
    if config.zone.is_empty() {
        return Err(Error::invalid("sensitive zone is empty"));
    }
    let zone: HashSet<CellId> = config.zone.iter().copied().collect();
    let targets: Vec<Vec<Point>> = attacked
        .iter()
        .map(|t| restrict_to_zone(t, grid, &zone))
        .filter(|p| !p.is_empty())
        .collect();
    if targets.is_empty() {
        return Err(Error::invalid("no attacked trajectory intersects the sensitive zone"));
    }
    let sim_max = (0..targets.len())
        .into_par_iter()
        .map(|i| {
            targets[i + 1..]
                .iter()
                .map(|t| dtw_bounded(&targets[i], t, f64::INFINITY).unwrap_or(0.0))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let threshold = config.theta_ratio * sim_max;
    let candidates: Vec<Vec<Point>> = syn
        .par_iter()
        .map(|t| restrict_to_zone(t, grid, &zone))
        .filter(|p| !p.is_empty())
        .collect();
    let matches = targets
        .par_iter()
        .map(|t| {
            candidates
                .iter()
                .filter(|c| dtw_bounded(t, c, threshold).is_some())
                .count()
        })
        .collect();
    Ok(AttackOutcome {
        matches,
        sim_max,
        threshold,
    })
}

pub fn reidentification_resilience(
    syn: &[RawTrajectory],
    attacked: &[RawTrajectory],
    grid: &Grid,
    config: &AttackConfig,
) -> Result<f64> {
    Ok(reidentification_attack(syn, attacked, grid, config)?.resilience(config.kappa))
}

/// Synthetic trajectories with the longest travel distance are the
/// outliers; each is matched by the real trajectories whose travel distance
/// is within `delta_ratio` of the longest real travel distance.
pub fn outlier_attack(real: &[RawTrajectory], syn: &[RawTrajectory], config: &AttackConfig) -> Result<AttackOutcome> {
    config.validate()?;
    if real.is_empty() || syn.is_empty() {
        return Err(Error::invalid(
            "outlier attack needs non-empty real and synthetic corpora",
        ));
    }
    let mut real_d: Vec<f64> = real.par_iter().map(RawTrajectory::travel_distance).collect();
    real_d.sort_by(f64::total_cmp);
    let sim_max = real_d[real_d.len() - 1];
    let threshold = config.delta_ratio * sim_max;

    let syn_d: Vec<f64> = syn.par_iter().map(RawTrajectory::travel_distance).collect();
    let mut order: Vec<usize> = (0..syn_d.len()).collect();
    order.sort_by(|&a, &b| syn_d[b].total_cmp(&syn_d[a]).then(a.cmp(&b)));
    let n_outliers = ((config.outlier_fraction * syn.len() as f64).ceil() as usize).clamp(1, syn.len());

    let matches = order[..n_outliers]
        .iter()
        .map(|&i| {
            let d = syn_d[i];
            let lo = real_d.partition_point(|&x| x < d - threshold);
            let hi = real_d.partition_point(|&x| x <= d + threshold);
            hi - lo
        })
        .collect();
    Ok(AttackOutcome {
        matches,
        sim_max,
        threshold,
    })
}

pub fn outlier_resilience(real: &[RawTrajectory], syn: &[RawTrajectory], config: &AttackConfig) -> Result<f64> {
    Ok(outlier_attack(real, syn, config)?.resilience(config.kappa))
}
