//! User-side reporting.
//!
//! The protocol runs in two rounds. In round one every user reports a noisy
//! trajectory length under `eps / 10`. The curator estimates the length
//! distribution and announces the transition cap `L_k`; in round two every
//! user reports up to `L_k` intra-trajectory transitions plus one beginning
//! and one terminated transition, each under the same per-transition budget.

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::grid::{CellId, CellTrajectory, Grid, DIRECTIONS};
use crate::oue::{encode, perturb, Bits, Report};

/// Share of the total budget spent on the length report.
pub const LENGTH_SHARE: f64 = 0.1;

/// Budget split of one user's total `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub eps_total: f64,
    pub eps_length: f64,
    /// Intra, beginning and terminated transitions together.
    pub eps_transitions: f64,
    pub per_transition: f64,
    pub l_k: usize,
}

impl PrivacyBudget {
    /// Budget a user spends when reporting `n_intra` intra transitions.
    pub fn consumed(&self, n_intra: usize) -> f64 {
        self.eps_length + (n_intra as f64 + 2.0) * self.per_transition
    }
}

fn check_total(eps_total: f64) -> Result<()> {
    if eps_total > 0.0 && eps_total.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "total budget must be positive and finite, got {eps_total}"
        )))
    }
}

/// Round-one budget: a tenth of the total.
pub fn length_budget(eps_total: f64) -> Result<f64> {
    check_total(eps_total)?;
    Ok(eps_total * LENGTH_SHARE)
}

/// Splits `eps_total` into the length share and `l_k + 2` equal transition shares.
pub fn plan_budget(eps_total: f64, l_k: usize) -> Result<PrivacyBudget> {
    check_total(eps_total)?;
    if l_k == 0 {
        return Err(Error::invalid("transition cap must be at least 1"));
    }
    let eps_length = eps_total * LENGTH_SHARE;
    let eps_transitions = eps_total - eps_length;
    Ok(PrivacyBudget {
        eps_total,
        eps_length,
        eps_transitions,
        per_transition: eps_transitions / (l_k as f64 + 2.0),
        l_k,
    })
}

const NO_SLOT: u32 = u32::MAX;

/// Dense enumeration of transition states over a grid.
///
/// Intra states `s_ij` are ordered by source cell (row-major) and then by
/// neighbor direction (row-major). Beginning state `A_i` and terminated state
/// `B_i` both use the flat index of cell `i` in their own `|C|`-sized domains.
#[derive(Debug, Clone)]
pub struct TransitionDomain {
    grid: Grid,
    offsets: Vec<u32>,
    slots: Vec<[u32; 8]>,
    states: Vec<(u32, u32)>,
}

impl TransitionDomain {
    pub fn new(grid: &Grid) -> Self {
        let cells = grid.cell_count();
        let mut offsets = Vec::with_capacity(cells + 1);
        let mut slots = Vec::with_capacity(cells);
        let mut states = Vec::new();
        for i in 0..cells {
            offsets.push(states.len() as u32);
            let from = grid.cell_at(i);
            let mut slot = [NO_SLOT; 8];
            for (d, &(dr, dc)) in DIRECTIONS.iter().enumerate() {
                if let Some(to) = grid.offset(from, dr, dc) {
                    slot[d] = states.len() as u32;
                    states.push((i as u32, grid.flat_index(to) as u32));
                }
            }
            slots.push(slot);
        }
        offsets.push(states.len() as u32);
        TransitionDomain {
            grid: *grid,
            offsets,
            slots,
            states,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of intra-trajectory states, the sum of all neighborhood sizes.
    pub fn intra_size(&self) -> usize {
        self.states.len()
    }

    /// Size of the beginning and of the terminated domain.
    pub fn endpoint_size(&self) -> usize {
        self.grid.cell_count()
    }

    /// Index range of the states leaving the cell with flat index `from`.
    pub fn outgoing(&self, from: usize) -> std::ops::Range<usize> {
        self.offsets[from] as usize..self.offsets[from + 1] as usize
    }

    pub fn transition_index(&self, from: CellId, to: CellId) -> Result<usize> {
        if !self.grid.contains_cell(from) || !self.grid.contains_cell(to) {
            return Err(Error::invariant(format!("transition {from} -> {to} leaves the grid")));
        }
        let dr = to.row as i64 - from.row as i64;
        let dc = to.col as i64 - from.col as i64;
        let slot = DIRECTIONS
            .iter()
            .position(|&d| d == (dr, dc))
            .map(|d| self.slots[self.grid.flat_index(from)][d])
            .filter(|&s| s != NO_SLOT);
        slot.map(|s| s as usize)
            .ok_or_else(|| Error::invariant(format!("{from} -> {to} is not an adjacent-cell transition")))
    }

    /// `(from, to)` cells of intra state `index`.
    pub fn state(&self, index: usize) -> (CellId, CellId) {
        let (a, b) = self.states[index];
        (self.grid.cell_at(a as usize), self.grid.cell_at(b as usize))
    }

    pub fn endpoint_index(&self, cell: CellId) -> Result<usize> {
        if self.grid.contains_cell(cell) {
            Ok(self.grid.flat_index(cell))
        } else {
            Err(Error::invariant(format!("cell {cell} is outside the grid")))
        }
    }
}

/// Which domain a report belongs to; the discriminant is the wire id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ReportKind {
    Length = 0,
    Transition = 1,
    Begin = 2,
    End = 3,
}

impl TryFrom<u8> for ReportKind {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(ReportKind::Length),
            1 => Ok(ReportKind::Transition),
            2 => Ok(ReportKind::Begin),
            3 => Ok(ReportKind::End),
            other => Err(Error::protocol(format!("unknown report domain id {other}"))),
        }
    }
}

/// Length report: one-hot at `min(|traj|, |C|) - 1`.
pub fn report_length<R: RngCore + ?Sized>(
    traj: &CellTrajectory,
    cell_count: usize,
    eps_length: f64,
    rng: &mut R,
) -> Result<Report> {
    if cell_count == 0 {
        return Err(Error::invalid("length domain must be non-empty"));
    }
    let index = traj.len().min(cell_count) - 1;
    perturb(&encode(index, cell_count)?, eps_length, rng)
}

/// The first `min(|traj| - 1, l_k)` transitions, perturbed independently and
/// shuffled.
pub fn report_transitions<R: RngCore + ?Sized>(
    traj: &CellTrajectory,
    domain: &TransitionDomain,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<Vec<Report>> {
    let d = domain.intra_size();
    let mut reports = traj
        .transitions()
        .take(budget.l_k)
        .map(|(from, to)| {
            let index = domain.transition_index(from, to)?;
            perturb(&encode(index, d)?, budget.per_transition, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    reports.shuffle(rng);
    Ok(reports)
}

/// Beginning report at `A_first` and terminated report at `B_last`.
pub fn report_endpoints<R: RngCore + ?Sized>(
    traj: &CellTrajectory,
    domain: &TransitionDomain,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<(Report, Report)> {
    let d = domain.endpoint_size();
    let begin = perturb(
        &encode(domain.endpoint_index(traj.first())?, d)?,
        budget.per_transition,
        rng,
    )?;
    let end = perturb(
        &encode(domain.endpoint_index(traj.last())?, d)?,
        budget.per_transition,
        rng,
    )?;
    Ok((begin, end))
}

/// Everything a user sends in round two.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionReports {
    pub transitions: Vec<Report>,
    pub begin: Report,
    pub end: Report,
}

pub fn report_round_two<R: RngCore + ?Sized>(
    traj: &CellTrajectory,
    domain: &TransitionDomain,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<TransitionReports> {
    let transitions = report_transitions(traj, domain, budget, rng)?;
    let (begin, end) = report_endpoints(traj, domain, budget, rng)?;
    Ok(TransitionReports {
        transitions,
        begin,
        end,
    })
}

/// All reports one user transmits over both rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReportBundle {
    pub length: Report,
    pub transitions: Vec<Report>,
    pub begin: Report,
    pub end: Report,
}

impl ClientReportBundle {
    pub fn new(length: Report, round_two: TransitionReports) -> Self {
        ClientReportBundle {
            length,
            transitions: round_two.transitions,
            begin: round_two.begin,
            end: round_two.end,
        }
    }

    pub fn records(&self) -> impl Iterator<Item = (ReportKind, &Report)> {
        std::iter::once((ReportKind::Length, &self.length))
            .chain(self.transitions.iter().map(|r| (ReportKind::Transition, r)))
            .chain([(ReportKind::Begin, &self.begin), (ReportKind::End, &self.end)])
    }

    /// Total budget spent by this user.
    pub fn consumed_budget(&self) -> f64 {
        self.records().map(|(_, r)| r.epsilon()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (kind, report) in self.records() {
            write_record(kind, report, &mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut length = None;
        let mut transitions = Vec::new();
        let mut begin = None;
        let mut end = None;
        for (kind, report) in read_records(bytes)? {
            let slot = match kind {
                ReportKind::Transition => {
                    transitions.push(report);
                    continue;
                }
                ReportKind::Length => &mut length,
                ReportKind::Begin => &mut begin,
                ReportKind::End => &mut end,
            };
            if slot.replace(report).is_some() {
                return Err(Error::protocol(format!("duplicate {kind:?} report in bundle")));
            }
        }
        let missing = |k: &str| Error::protocol(format!("bundle has no {k} report"));
        Ok(ClientReportBundle {
            length: length.ok_or_else(|| missing("length"))?,
            transitions,
            begin: begin.ok_or_else(|| missing("beginning"))?,
            end: end.ok_or_else(|| missing("terminated"))?,
        })
    }
}

/// Appends one record: `u32` body length, then domain id `u8`, epsilon `f64`,
/// bit count `u32` and the bits packed least-significant first. All integers
/// and floats are little-endian.
pub fn write_record(kind: ReportKind, report: &Report, out: &mut Vec<u8>) {
    let nbits = report.domain_size();
    let nbytes = nbits.div_ceil(8);
    let body = 1 + 8 + 4 + nbytes;
    out.extend_from_slice(&(body as u32).to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&report.epsilon().to_le_bytes());
    out.extend_from_slice(&(nbits as u32).to_le_bytes());
    let words = report.bits().as_raw_slice();
    out.extend((0..nbytes).map(|i| (words[i / 8] >> (8 * (i % 8))) as u8));
}

pub fn read_records(mut bytes: &[u8]) -> Result<Vec<(ReportKind, Report)>> {
    fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
        if bytes.len() < n {
            return Err(Error::protocol("truncated report record"));
        }
        let (head, tail) = bytes.split_at(n);
        *bytes = tail;
        Ok(head)
    }
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let body_len = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap()) as usize;
        let mut body = take(&mut bytes, body_len)?;
        let kind = ReportKind::try_from(take(&mut body, 1)?[0])?;
        let epsilon = f64::from_le_bytes(take(&mut body, 8)?.try_into().unwrap());
        let nbits = u32::from_le_bytes(take(&mut body, 4)?.try_into().unwrap()) as usize;
        if body.len() != nbits.div_ceil(8) {
            return Err(Error::protocol(format!(
                "record declares {nbits} bits but carries {} bytes",
                body.len()
            )));
        }
        let mut words = vec![0u64; nbits.div_ceil(64)];
        for (i, &b) in body.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        let mut bits = Bits::from_vec(words);
        bits.truncate(nbits);
        out.push((kind, Report::new(bits, epsilon)?));
    }
    Ok(out)
}
