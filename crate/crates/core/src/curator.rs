//! Curator-side estimation: length distribution, transition cap and the
//! aggregated mobility model.

use std::fmt::Write as _;

use crate::client::TransitionDomain;
use crate::error::{Error, Result};
use crate::grid::{BoundingBox, CellId, Grid, Node};
use crate::oue::{self, AggregatedEstimate, Aggregator, Report};

/// Clamps negative estimates to zero and normalizes. Falls back to uniform,
/// flagged by `false`, when no positive mass remains.
fn clamp_normalize(values: impl IntoIterator<Item = f64>) -> (Vec<f64>, bool) {
    let mut v: Vec<f64> = values.into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 && total.is_finite() {
        v.iter_mut().for_each(|x| *x /= total);
        (v, true)
    } else {
        let u = 1.0 / v.len().max(1) as f64;
        v.iter_mut().for_each(|x| *x = u);
        (v, false)
    }
}

/// Probability of each trajectory length `1..=|C|`; entry `m - 1` is `Pr(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthDistribution {
    probabilities: Vec<f64>,
}

impl LengthDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("length distribution needs at least one length"));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("length probabilities must be finite and non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("length probabilities sum to {total}")));
        }
        Ok(LengthDistribution { probabilities })
    }

    /// Clamp-then-normalize of debiased length counts; uniform if every count
    /// is non-positive.
    pub fn from_estimate(estimate: &AggregatedEstimate) -> Result<Self> {
        if estimate.counts.is_empty() {
            return Err(Error::invalid("length domain must be non-empty"));
        }
        let (probabilities, _) = clamp_normalize(estimate.counts.iter().copied());
        Ok(LengthDistribution { probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn max_length(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probability(&self, length: usize) -> f64 {
        if length == 0 {
            0.0
        } else {
            self.probabilities.get(length - 1).copied().unwrap_or(0.0)
        }
    }

    /// Smallest length whose cumulative probability reaches `k`.
    pub fn quantile(&self, k: f64) -> Result<usize> {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::invalid(format!("quantile must lie in (0, 1], got {k}")));
        }
        if k == 1.0 {
            let last = self.probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            return Ok(last + 1);
        }
        let mut cdf = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            cdf += p;
            // Tolerate rounding in the running sum, e.g. ten 0.1s.
            if cdf >= k - 1e-12 {
                return Ok(i + 1);
            }
        }
        Ok(self.probabilities.len())
    }

    /// Mean length.
    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }
}

/// Aggregates round-one reports into a length distribution.
pub fn estimate_length_distribution<'a>(
    reports: impl IntoIterator<Item = &'a Report>,
    cell_count: usize,
) -> Result<LengthDistribution> {
    let estimate = oue::aggregate(reports, cell_count)?;
    if estimate.n == 0 {
        return Err(Error::invalid("no length reports to aggregate"));
    }
    LengthDistribution::from_estimate(&estimate)
}

pub fn length_quantile(dist: &LengthDistribution, k: f64) -> Result<usize> {
    dist.quantile(k)
}

/// Transition probabilities over cells plus the virtual start and end.
///
/// The row of cell `i` lists its neighbors in row-major direction order
/// followed by the virtual end. The start row covers every cell in flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityModel {
    grid: Grid,
    start: Vec<f64>,
    start_cdf: Vec<f64>,
    rows: Vec<Vec<f64>>,
    targets: Vec<Vec<CellId>>,
}

impl MobilityModel {
    /// Builds a model from explicit rows, validating each one.
    pub fn from_rows(grid: &Grid, start: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if start.len() != grid.cell_count() || rows.len() != grid.cell_count() {
            return Err(Error::protocol("model rows do not match the grid"));
        }
        let targets: Vec<Vec<CellId>> = grid.cells().map(|c| grid.neighbors_unchecked(c).collect()).collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != targets[i].len() + 1 {
                return Err(Error::protocol(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    targets[i].len() + 1
                )));
            }
        }
        let model = MobilityModel {
            grid: *grid,
            start_cdf: cumulative(&start),
            start,
            rows,
            targets,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn start_row(&self) -> &[f64] {
        &self.start
    }

    pub(crate) fn start_cdf(&self) -> &[f64] {
        &self.start_cdf
    }

    /// Probabilities of leaving `cell`; the last entry is the virtual end.
    pub fn row(&self, cell: CellId) -> &[f64] {
        &self.rows[self.grid.flat_index(cell)]
    }

    /// Successor cells matching all but the last entry of [`row`](Self::row).
    pub fn successors(&self, cell: CellId) -> &[CellId] {
        &self.targets[self.grid.flat_index(cell)]
    }

    pub fn end_probability(&self, cell: CellId) -> f64 {
        *self.row(cell).last().expect("rows always hold the end entry")
    }

    /// `Pr(from -> to)` for any pair of model nodes.
    pub fn probability(&self, from: Node, to: Node) -> f64 {
        match (from, to) {
            (Node::Start, Node::Cell(c)) if self.grid.contains_cell(c) => self.start[self.grid.flat_index(c)],
            (Node::Cell(a), Node::End) if self.grid.contains_cell(a) => self.end_probability(a),
            (Node::Cell(a), Node::Cell(b)) if self.grid.contains_cell(a) => self
                .successors(a)
                .iter()
                .position(|&c| c == b)
                .map_or(0.0, |j| self.row(a)[j]),
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: String, row: &[f64]| -> Result<()> {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::invariant(format!(
                    "{name} is not a probability distribution (sum {total})"
                )));
            }
            Ok(())
        };
        check("start row".into(), &self.start)?;
        for (i, row) in self.rows.iter().enumerate() {
            check(format!("row of cell {}", self.grid.cell_at(i)), row)?;
        }
        Ok(())
    }

    /// Plain-text export.
    ///
    /// ```text
    /// mobility-model v1 n=<n> bbox=<min_x>,<min_y>,<max_x>,<max_y>
    /// start <cell>:<p> ...
    /// <cell> <cell>:<p> ... end:<p>
    /// ```
    /// Cells are flat indices; probabilities carry 12 significant digits.
    pub fn to_text(&self) -> String {
        let b = self.grid.bbox();
        let mut out = format!(
            "mobility-model v1 n={} bbox={},{},{},{}\n",
            self.grid.n(),
            b.min_x,
            b.min_y,
            b.max_x,
            b.max_y
        );
        out.push_str("start");
        for (i, p) in self.start.iter().enumerate() {
            let _ = write!(out, " {i}:{p:.11e}");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{i}");
            for (c, p) in self.targets[i].iter().zip(row) {
                let _ = write!(out, " {}:{p:.11e}", self.grid.flat_index(*c));
            }
            let _ = writeln!(out, " end:{:.11e}", row[row.len() - 1]);
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Printed probabilities are
    /// kept as read, so a re-export reproduces the text exactly.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            path: "<model>".into(),
            line,
            message: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty model"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "mobility-model" || fields[1] != "v1" {
            return Err(bad(1, "expected 'mobility-model v1' header"));
        }
        let n: u32 = fields[2]
            .strip_prefix("n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "bad grid size"))?;
        let bbox: Vec<f64> = fields[3]
            .strip_prefix("bbox=")
            .map(|v| v.split(',').filter_map(|x| x.parse().ok()).collect())
            .unwrap_or_default();
        if bbox.len() != 4 {
            return Err(bad(1, "bad bounding box"));
        }
        let grid = Grid::new(BoundingBox::new(bbox[0], bbox[1], bbox[2], bbox[3])?, n)?;
        let cells = grid.cell_count();
        let mut start = None;
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; cells];
        for (ln, line) in lines {
            let ln = ln + 1;
            let mut parts = line.split_whitespace();
            let node = parts.next().unwrap_or_default();
            let mut values = Vec::new();
            let mut ids = Vec::new();
            for pair in parts {
                let (id, p) = pair.split_once(':').ok_or_else(|| bad(ln, "expected id:probability"))?;
                ids.push(id.to_string());
                values.push(p.parse::<f64>().map_err(|_| bad(ln, "bad probability"))?);
            }
            if node == "start" {
                let expected: Vec<String> = (0..cells).map(|i| i.to_string()).collect();
                if ids != expected {
                    return Err(bad(ln, "start row must list every cell in order"));
                }
                start = Some(values);
            } else {
                let i: usize = node.parse().map_err(|_| bad(ln, "bad node id"))?;
                if i >= cells {
                    return Err(bad(ln, "node id outside the grid"));
                }
                let mut expected: Vec<String> = grid
                    .neighbors_unchecked(grid.cell_at(i))
                    .map(|c| grid.flat_index(c).to_string())
                    .collect();
                expected.push("end".into());
                if ids != expected {
                    return Err(bad(ln, "row targets do not match the cell's neighborhood"));
                }
                rows[i] = Some(values);
            }
        }
        let start = start.ok_or_else(|| bad(1, "missing start row"))?;
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| bad(1, &format!("missing row for cell {i}"))))
            .collect::<Result<Vec<_>>>()?;
        MobilityModel::from_rows(&grid, start, rows)
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Normalizes debiased transition counts into a mobility model.
///
/// Row `i` is `g(s_ij)` for each neighbor `j` followed by `g(B_i)`, clamped at
/// zero and normalized; a row with no positive mass becomes uniform. The start
/// row is built the same way from `g(A_j)`.
pub fn build_mobility_model(
    transitions: &AggregatedEstimate,
    begins: &AggregatedEstimate,
    ends: &AggregatedEstimate,
    domain: &TransitionDomain,
) -> Result<MobilityModel> {
    let grid = domain.grid();
    let cells = grid.cell_count();
    if transitions.domain_size() != domain.intra_size() {
        return Err(Error::protocol(format!(
            "transition estimate covers {} states, the grid has {}",
            transitions.domain_size(),
            domain.intra_size()
        )));
    }
    if begins.domain_size() != cells || ends.domain_size() != cells {
        return Err(Error::protocol("endpoint estimates do not match the grid"));
    }
    let budgets: Vec<f64> = [transitions, begins, ends].iter().filter_map(|e| e.epsilon).collect();
    if budgets.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::protocol(format!(
            "transition estimates were made under different budgets: {budgets:?}"
        )));
    }
    let (start, _) = clamp_normalize(begins.counts.iter().copied());
    let rows = (0..cells)
        .map(|i| {
            let intra = domain.outgoing(i).map(|s| transitions.counts[s]);
            clamp_normalize(intra.chain([ends.counts[i]])).0
        })
        .collect();
    MobilityModel::from_rows(grid, start, rows)
}

/// Aggregators for the three round-two domains.
#[derive(Debug, Clone)]
pub struct TransitionAggregators {
    pub transitions: Aggregator,
    pub begins: Aggregator,
    pub ends: Aggregator,
}

impl TransitionAggregators {
    pub fn new(domain: &TransitionDomain) -> Self {
        TransitionAggregators {
            transitions: Aggregator::new(domain.intra_size()),
            begins: Aggregator::new(domain.endpoint_size()),
            ends: Aggregator::new(domain.endpoint_size()),
        }
    }

    pub fn add(&mut self, reports: &crate::client::TransitionReports) -> Result<()> {
        for r in &reports.transitions {
            self.transitions.add(r)?;
        }
        self.begins.add(&reports.begin)?;
        self.ends.add(&reports.end)
    }

    pub fn merge(&mut self, other: &TransitionAggregators) -> Result<()> {
        self.transitions.merge(&other.transitions)?;
        self.begins.merge(&other.begins)?;
        self.ends.merge(&other.ends)
    }

    pub fn build_model(&self, domain: &TransitionDomain) -> Result<MobilityModel> {
        build_mobility_model(
            &self.transitions.finalize(),
            &self.begins.finalize(),
            &self.ends.finalize(),
            domain,
        )
    }
}

/// Diagnostic total error of the transition model when each user reports
/// `l_k` transitions under `eps2 / l_k` each and a `1 - k` share of
/// transitions is truncated away.
///
/// `est_frequencies` are debiased transition counts standing in for the
/// unknown true ones. Per state, the noise term is the first-order variance
/// of `g(s) / sum g`, and the bias term is `(1 - k)^2 p_s^2` with `p_s` the
/// state's estimated share.
pub fn transition_error_model(est_frequencies: &[f64], eps2: f64, l_k: usize, k: f64, n_reports: u64) -> Result<f64> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::invalid(format!("quantile must lie in (0, 1], got {k}")));
    }
    if l_k == 0 {
        return Err(Error::invalid("transition cap must be at least 1"));
    }
    if est_frequencies.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::invalid("frequencies must be non-negative"));
    }
    let total: f64 = est_frequencies.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("frequencies must not all be zero"));
    }
    let sigma2 = if eps2.is_infinite() && eps2 > 0.0 {
        0.0
    } else {
        oue::oue_variance(n_reports, eps2 / l_k as f64)?
    };
    let d = est_frequencies.len() as f64;
    let mut error = 0.0;
    for &f in est_frequencies {
        // The denominator sums d independent estimates, one of which is f itself.
        let (_, noise) = oue::ratio_stats(f, total, sigma2, d * sigma2, sigma2)?;
        let share = f / total;
        error += noise + (1.0 - k) * (1.0 - k) * share * share;
    }
    Ok(error)
}

/// Grid search for the quantile minimizing [`transition_error_model`]; ties go
/// to the larger candidate.
pub fn suggest_k(
    est_frequencies: &[f64],
    eps2: f64,
    length_dist: &LengthDistribution,
    n_users: u64,
    candidate_ks: &[f64],
) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &k in candidate_ks {
        let l_k = length_dist.quantile(k)?;
        let err = transition_error_model(est_frequencies, eps2, l_k, k, n_users * l_k as u64)?;
        best = match best {
            None => Some((k, err)),
            Some((bk, be)) => {
                let tie = (err - be).abs() <= 1e-12 * be.abs().max(err.abs());
                if err < be && !tie || tie && k > bk {
                    Some((k, err))
                } else {
                    Some((bk, be))
                }
            }
        };
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| Error::invalid("no candidate quantiles given"))
}
