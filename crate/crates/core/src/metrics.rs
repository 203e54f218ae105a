//! Utility metrics comparing a real and a synthetic corpus over one grid.
//!
//! Divergences use log base 2 and so lie in `[0, 1]`.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{BoundingBox, CellId, CellTrajectory, Grid, RawTrajectory};
use crate::rng::SeedStream;

pub const DEFAULT_QUERIES: usize = 200;
pub const DEFAULT_QUERY_RATIO: f64 = 1.0 / 9.0;
pub const DEFAULT_HOTSPOTS: usize = 5;
pub const DEFAULT_TOP_PATTERNS: usize = 100;
pub const DEFAULT_MAX_PATTERN_LEN: usize = 3;
pub const HISTOGRAM_BUCKETS: usize = 20;

/// Jensen-Shannon divergence (base 2) of two probability vectors.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "distributions have different lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    Ok(jsd_terms(p.iter().copied().zip(q.iter().copied())))
}

fn jsd_terms(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let kl = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let mut total = 0.0;
    for (p, q) in pairs {
        let m = 0.5 * (p + q);
        total += 0.5 * kl(p, m) + 0.5 * kl(q, m);
    }
    total.clamp(0.0, 1.0)
}

/// JSD between two count histograms, normalized internally.
fn jsd_counts(a: &[u64], b: &[u64], what: &str) -> Result<f64> {
    let (na, nb) = (total(a), total(b));
    if na == 0 || nb == 0 {
        return Err(Error::invalid(format!("{what}: a corpus contributes no observations")));
    }
    let (na, nb) = (na as f64, nb as f64);
    Ok(jsd_terms(
        a.iter().zip(b).map(|(&x, &y)| (x as f64 / na, y as f64 / nb)),
    ))
}

/// JSD between two sparse count maps. Keys are sorted first so the sum is
/// evaluated in a fixed order.
fn jsd_sparse<K: Ord + Hash + Copy>(a: &HashMap<K, u64>, b: &HashMap<K, u64>, what: &str) -> Result<f64> {
    let mut keys: Vec<K> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let get = |m: &HashMap<K, u64>, k: &K| m.get(k).copied().unwrap_or(0);
    let ca: Vec<u64> = keys.iter().map(|k| get(a, k)).collect();
    let cb: Vec<u64> = keys.iter().map(|k| get(b, k)).collect();
    jsd_counts(&ca, &cb, what)
}

fn total(v: &[u64]) -> u64 {
    v.iter().sum()
}

fn non_empty<T>(corpus: &[T], name: &str) -> Result<()> {
    if corpus.is_empty() {
        Err(Error::invalid(format!("{name} corpus is empty")))
    } else {
        Ok(())
    }
}

/// Visits per cell across the corpus, indexed by flat cell index.
pub fn cell_visits(corpus: &[CellTrajectory], grid: &Grid) -> Vec<u64> {
    corpus
        .par_iter()
        .fold(
            || vec![0u64; grid.cell_count()],
            |mut acc, t| {
                for c in t.cells() {
                    acc[grid.flat_index(*c)] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; grid.cell_count()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

pub fn density_error(real: &[CellTrajectory], syn: &[CellTrajectory], grid: &Grid) -> Result<f64> {
    non_empty(real, "real")?;
    non_empty(syn, "synthetic")?;
    jsd_counts(&cell_visits(real, grid), &cell_visits(syn, grid), "density")
}

/// `count` axis-aligned rectangles, each spanning `sqrt(ratio)` of both
/// sides of `bbox`, placed uniformly inside it.
pub fn random_queries<R: Rng + ?Sized>(
    bbox: &BoundingBox,
    count: usize,
    ratio: f64,
    rng: &mut R,
) -> Result<Vec<BoundingBox>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!(
            "query area ratio must be in (0, 1], got {ratio}"
        )));
    }
    let side = ratio.sqrt();
    let (w, h) = (bbox.width() * side, bbox.height() * side);
    (0..count)
        .map(|_| {
            let x = bbox.min_x + rng.random::<f64>() * (bbox.width() - w);
            let y = bbox.min_y + rng.random::<f64>() * (bbox.height() - h);
            BoundingBox::new(x, y, x + w, y + h)
        })
        .collect()
}

/// Number of corpus points inside `region`, boundary included.
pub fn count_points(corpus: &[RawTrajectory], region: &BoundingBox) -> u64 {
    corpus
        .iter()
        .map(|t| t.points.iter().filter(|p| region.contains(p)).count() as u64)
        .sum()
}

/// Mean relative count error over `queries`, with the sanity bound set to
/// one percent of the real corpus size in points.
pub fn query_error_for(real: &[RawTrajectory], syn: &[RawTrajectory], queries: &[BoundingBox]) -> Result<f64> {
    non_empty(real, "real")?;
    if queries.is_empty() {
        return Err(Error::invalid("no range queries"));
    }
    let z = real.iter().map(|t| t.len()).sum::<usize>() as f64 / 100.0;
    let errors: Vec<f64> = queries
        .par_iter()
        .map(|q| {
            let a = count_points(real, q) as f64;
            let b = count_points(syn, q) as f64;
            let denom = a.max(z);
            if denom > 0.0 {
                (a - b).abs() / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

pub fn query_error<R: Rng + ?Sized>(
    real: &[RawTrajectory],
    syn: &[RawTrajectory],
    grid: &Grid,
    n_queries: usize,
    ratio: f64,
    rng: &mut R,
) -> Result<f64> {
    let queries = random_queries(grid.bbox(), n_queries, ratio, rng)?;
    query_error_for(real, syn, &queries)
}

/// The `n` most visited cells, ties broken by flat index.
pub fn hotspots(visits: &[u64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..visits.len()).filter(|&i| visits[i] > 0).collect();
    order.sort_by(|&a, &b| visits[b].cmp(&visits[a]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// One minus the normalized discounted gain of the synthetic hotspot list
/// against the real one. Relevance of a cell is the reciprocal of its real
/// rank.
pub fn hotspot_query_error(real: &[CellTrajectory], syn: &[CellTrajectory], grid: &Grid, n_h: usize) -> Result<f64> {
    if n_h == 0 {
        return Err(Error::invalid("hotspot count must be at least 1"));
    }
    let real_top = hotspots(&cell_visits(real, grid), n_h);
    let syn_top = hotspots(&cell_visits(syn, grid), n_h);
    for (name, top) in [("real", &real_top), ("synthetic", &syn_top)] {
        if top.len() < n_h {
            return Err(Error::invalid(format!(
                "{name} corpus visits {} distinct cells, fewer than the {n_h} hotspots requested",
                top.len()
            )));
        }
    }
    let ideal: f64 = (1..=n_h).map(|j| 1.0 / (j as f64 * (j as f64 + 1.0).ln())).sum();
    let gain: f64 = syn_top
        .iter()
        .enumerate()
        .map(|(i, cell)| match real_top.iter().position(|c| c == cell) {
            Some(r) => 1.0 / ((r + 1) as f64 * (i as f64 + 2.0).ln()),
            None => 0.0,
        })
        .sum();
    Ok(1.0 - gain / ideal)
}

/// Rank correlation of per-cell densities over all cell pairs. A pair is
/// concordant when both corpora order it the same way under `>=` or `<=`,
/// so ties count as concordant; only strictly opposite pairs are discordant.
pub fn kendall_tau(real: &[CellTrajectory], syn: &[CellTrajectory], grid: &Grid) -> Result<f64> {
    non_empty(real, "real")?;
    non_empty(syn, "synthetic")?;
    Ok(kendall_tau_counts(&cell_visits(real, grid), &cell_visits(syn, grid)))
}

pub fn kendall_tau_counts(a: &[u64], b: &[u64]) -> f64 {
    let n = a.len() as u64;
    if n < 2 {
        return 1.0;
    }
    let pairs = n * (n - 1) / 2;
    let d = strictly_discordant(a, b);
    (pairs as f64 - 2.0 * d as f64) / pairs as f64
}

/// Pairs with `a_i < a_j` and `b_i > b_j`, counted with a Fenwick tree over
/// the ranks of `b`.
fn strictly_discordant(a: &[u64], b: &[u64]) -> u64 {
    let mut ranks: Vec<u64> = b.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    let rank = |v: u64| ranks.binary_search(&v).expect("value present") + 1;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by_key(|&i| a[i]);
    let mut tree = vec![0u64; ranks.len() + 1];
    let prefix = |tree: &[u64], mut i: usize| {
        let mut s = 0;
        while i > 0 {
            s += tree[i];
            i &= i - 1;
        }
        s
    };
    let mut inserted = 0u64;
    let mut discordant = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && a[order[end]] == a[order[start]] {
            end += 1;
        }
        // Earlier groups have strictly smaller `a`.
        for &i in &order[start..end] {
            discordant += inserted - prefix(&tree, rank(b[i]));
        }
        for &i in &order[start..end] {
            let mut r = rank(b[i]);
            while r < tree.len() {
                tree[r] += 1;
                r += r & r.wrapping_neg();
            }
            inserted += 1;
        }
        start = end;
    }
    discordant
}

fn trip_counts(corpus: &[CellTrajectory], grid: &Grid) -> HashMap<(usize, usize), u64> {
    let mut m = HashMap::new();
    for t in corpus {
        *m.entry((grid.flat_index(t.first()), grid.flat_index(t.last())))
            .or_insert(0) += 1;
    }
    m
}

/// JSD of the joint (start cell, end cell) distributions.
pub fn trip_error(real: &[CellTrajectory], syn: &[CellTrajectory], grid: &Grid) -> Result<f64> {
    non_empty(real, "real")?;
    non_empty(syn, "synthetic")?;
    jsd_sparse(&trip_counts(real, grid), &trip_counts(syn, grid), "trip")
}

/// Equal-width histogram of `values` over `[0, max]`.
pub fn histogram(values: &[f64], max: f64, buckets: usize) -> Vec<u64> {
    let mut h = vec![0u64; buckets];
    for &v in values {
        let i = if max > 0.0 {
            ((v / max * buckets as f64).floor() as usize).min(buckets - 1)
        } else {
            0
        };
        h[i] += 1;
    }
    h
}

fn statistic_error(
    real: &[RawTrajectory],
    syn: &[RawTrajectory],
    stat: fn(&RawTrajectory) -> f64,
    what: &str,
) -> Result<f64> {
    non_empty(real, "real")?;
    non_empty(syn, "synthetic")?;
    let a: Vec<f64> = real.par_iter().map(stat).collect();
    let b: Vec<f64> = syn.par_iter().map(stat).collect();
    let max = a.iter().chain(&b).copied().fold(0.0, f64::max);
    jsd_counts(
        &histogram(&a, max, HISTOGRAM_BUCKETS),
        &histogram(&b, max, HISTOGRAM_BUCKETS),
        what,
    )
}

/// JSD of travel-distance histograms.
pub fn length_error(real: &[RawTrajectory], syn: &[RawTrajectory]) -> Result<f64> {
    statistic_error(real, syn, RawTrajectory::travel_distance, "length")
}

/// JSD of diameter histograms.
pub fn diameter_error(real: &[RawTrajectory], syn: &[RawTrajectory]) -> Result<f64> {
    statistic_error(real, syn, RawTrajectory::diameter, "diameter")
}

pub type Pattern = Vec<CellId>;

/// Occurrences of every contiguous subsequence of length `2..=max_len`,
/// overlaps included.
pub fn pattern_counts(corpus: &[CellTrajectory], max_len: usize) -> HashMap<Pattern, u64> {
    corpus
        .par_iter()
        .fold(HashMap::new, |mut acc, t| {
            let cells = t.cells();
            for len in 2..=max_len.min(cells.len()) {
                for w in cells.windows(len) {
                    *acc.entry(w.to_vec()).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// The `n` most frequent patterns, ties broken by the lexicographic order
/// of their cells.
pub fn top_patterns(counts: &HashMap<Pattern, u64>, n: usize) -> Vec<(Pattern, u64)> {
    let mut all: Vec<(&Pattern, u64)> = counts.iter().map(|(p, c)| (p, *c)).collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.truncate(n);
    all.into_iter().map(|(p, c)| (p.clone(), c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternMetrics {
    pub f1: f64,
    pub error: f64,
    /// Sizes of the top sets actually used; below `top_n` when a corpus has
    /// fewer distinct patterns.
    pub real_patterns: usize,
    pub syn_patterns: usize,
}

pub fn pattern_metrics(
    real: &[CellTrajectory],
    syn: &[CellTrajectory],
    top_n: usize,
    max_pattern_len: usize,
) -> Result<PatternMetrics> {
    non_empty(real, "real")?;
    non_empty(syn, "synthetic")?;
    if top_n == 0 || max_pattern_len < 2 {
        return Err(Error::invalid(
            "pattern mining needs top_n >= 1 and max_pattern_len >= 2",
        ));
    }
    let real_counts = pattern_counts(real, max_pattern_len);
    let syn_counts = pattern_counts(syn, max_pattern_len);
    let real_top = top_patterns(&real_counts, top_n);
    let syn_top = top_patterns(&syn_counts, top_n);
    if real_top.is_empty() {
        return Err(Error::invalid(
            "real corpus has no trajectory long enough to form a pattern",
        ));
    }
    let shared = real_top
        .iter()
        .filter(|(p, _)| syn_top.iter().any(|(q, _)| q == p))
        .count() as f64;
    let f1 = if shared == 0.0 {
        0.0
    } else {
        let precision = shared / syn_top.len() as f64;
        let recall = shared / real_top.len() as f64;
        2.0 * precision * recall / (precision + recall)
    };
    let error = real_top
        .iter()
        .map(|(p, n)| {
            let m = syn_counts.get(p).copied().unwrap_or(0);
            (*n as f64 - m as f64).abs() / *n as f64
        })
        .sum::<f64>()
        / real_top.len() as f64;
    Ok(PatternMetrics {
        f1,
        error,
        real_patterns: real_top.len(),
        syn_patterns: syn_top.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub n_queries: usize,
    pub query_ratio: f64,
    pub n_hotspots: usize,
    pub top_patterns: usize,
    pub max_pattern_len: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            n_queries: DEFAULT_QUERIES,
            query_ratio: DEFAULT_QUERY_RATIO,
            n_hotspots: DEFAULT_HOTSPOTS,
            top_patterns: DEFAULT_TOP_PATTERNS,
            max_pattern_len: DEFAULT_MAX_PATTERN_LEN,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityReport {
    pub density_error: f64,
    pub query_error: f64,
    pub hotspot_query_error: f64,
    pub kendall_tau: f64,
    pub trip_error: f64,
    pub length_error: f64,
    pub diameter_error: f64,
    pub pattern_f1: f64,
    pub pattern_error: f64,
}

impl UtilityReport {
    pub const NAMES: [&'static str; 9] = [
        "density_error",
        "query_error",
        "hotspot_query_error",
        "kendall_tau",
        "trip_error",
        "length_error",
        "diameter_error",
        "pattern_f1",
        "pattern_error",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.density_error,
            self.query_error,
            self.hotspot_query_error,
            self.kendall_tau,
            self.trip_error,
            self.length_error,
            self.diameter_error,
            self.pattern_f1,
            self.pattern_error,
        ]
    }

    pub fn fields(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::NAMES.into_iter().zip(self.values())
    }

    /// Single-line `key=value` record.
    pub fn to_record(&self) -> String {
        self.fields()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<22}{:>12}\n", "metric", "value");
        for (k, v) in self.fields() {
            out.push_str(&format!("{k:<22}{v:>12.6}\n"));
        }
        out
    }
}

impl fmt::Display for UtilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// A corpus in both forms: cells for the grid metrics and points for the
/// range-query, length and diameter metrics.
#[derive(Debug, Clone, Copy)]
pub struct Corpus<'a> {
    pub cells: &'a [CellTrajectory],
    pub points: &'a [RawTrajectory],
}

pub fn evaluate(real: Corpus<'_>, syn: Corpus<'_>, grid: &Grid, config: &MetricsConfig) -> Result<UtilityReport> {
    let mut rng = SeedStream::new(config.seed).rng(0);
    let patterns = pattern_metrics(real.cells, syn.cells, config.top_patterns, config.max_pattern_len)?;
    Ok(UtilityReport {
        density_error: density_error(real.cells, syn.cells, grid)?,
        query_error: query_error(
            real.points,
            syn.points,
            grid,
            config.n_queries,
            config.query_ratio,
            &mut rng,
        )?,
        hotspot_query_error: hotspot_query_error(real.cells, syn.cells, grid, config.n_hotspots)?,
        kendall_tau: kendall_tau(real.cells, syn.cells, grid)?,
        trip_error: trip_error(real.cells, syn.cells, grid)?,
        length_error: length_error(real.points, syn.points)?,
        diameter_error: diameter_error(real.points, syn.points)?,
        pattern_f1: patterns.f1,
        pattern_error: patterns.error,
    })
}
