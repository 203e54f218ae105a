//! Uniform geospatial discretization.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An ordered sequence of continuous-space points belonging to one user.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub id: String,
    pub points: Vec<Point>,
}

impl RawTrajectory {
    pub fn new(id: impl Into<String>, points: Vec<Point>) -> Self {
        RawTrajectory { id: id.into(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of Euclidean distances between consecutive points.
    pub fn travel_distance(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Largest distance between any two points of the trajectory.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max(a.distance(b));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let finite = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite());
        if !finite || max_x <= min_x || max_y <= min_y {
            return Err(Error::invalid(format!(
                "degenerate bounding box [{min_x}, {max_x}] x [{min_y}, {max_y}]"
            )));
        }
        Ok(BoundingBox {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    pub fn unit() -> Self {
        BoundingBox {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Tight bounds of a point set, grown by `margin` (a fraction of each side).
    ///
    /// A side of zero extent is widened to one unit so the box stays valid.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point>, margin: f64) -> Result<Self> {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = (lo.0.min(p.x), lo.1.min(p.y));
            hi = (hi.0.max(p.x), hi.1.max(p.y));
        }
        if !lo.0.is_finite() || !hi.0.is_finite() {
            return Err(Error::invalid("cannot bound an empty point set"));
        }
        let pad = |lo: f64, hi: f64| {
            let extent = hi - lo;
            if extent > 0.0 {
                (lo - extent * margin / 2.0, hi + extent * margin / 2.0)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (min_x, max_x) = pad(lo.0, hi.0);
        let (min_y, max_y) = pad(lo.1, hi.1);
        BoundingBox::new(min_x, min_y, max_x, max_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub row: u32,
    pub col: u32,
}

impl CellId {
    pub fn new(row: u32, col: u32) -> Self {
        CellId { row, col }
    }

    pub fn is_adjacent(&self, other: &CellId) -> bool {
        let dr = (self.row as i64 - other.row as i64).abs();
        let dc = (self.col as i64 - other.col as i64).abs();
        dr <= 1 && dc <= 1 && (dr, dc) != (0, 0)
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Row-major offsets of the 8-neighborhood. The order is part of the
/// transition-domain layout and of the exported model format.
pub(crate) const DIRECTIONS: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// A non-empty cell sequence in which consecutive cells are 8-adjacent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellTrajectory {
    cells: Vec<CellId>,
}

impl CellTrajectory {
    pub fn new(cells: Vec<CellId>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invariant("cell trajectory must contain at least one cell"));
        }
        if let Some(i) = cells.windows(2).position(|w| !w[0].is_adjacent(&w[1])) {
            return Err(Error::invariant(format!(
                "cells {} and {} at positions {} and {} are not adjacent",
                cells[i],
                cells[i + 1],
                i,
                i + 1
            )));
        }
        Ok(CellTrajectory { cells })
    }

    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> CellId {
        self.cells[0]
    }

    pub fn last(&self) -> CellId {
        self.cells[self.cells.len() - 1]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.cells.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn into_cells(self) -> Vec<CellId> {
        self.cells
    }
}

/// A node of the aggregated mobility model: a real cell or one of the two
/// virtual endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Start,
    Cell(CellId),
    End,
}

/// An `n` by `n` partition of a bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    bbox: BoundingBox,
    n: u32,
    cell_width: f64,
    cell_height: f64,
}

impl Grid {
    pub fn new(bbox: BoundingBox, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid granularity must be at least 1"));
        }
        // One side's worth of cells must fit the flat index and the
        // transition domain (about 8 n^2 entries) in u32.
        if n > 16_384 {
            return Err(Error::invalid(format!("grid granularity {n} is too large")));
        }
        Ok(Grid {
            bbox,
            n,
            cell_width: bbox.width() / n as f64,
            cell_height: bbox.height() / n as f64,
        })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        (self.n as usize) * (self.n as usize)
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn cell_height(&self) -> f64 {
        self.cell_height
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        cell.row < self.n && cell.col < self.n
    }

    pub fn flat_index(&self, cell: CellId) -> usize {
        cell.row as usize * self.n as usize + cell.col as usize
    }

    pub fn cell_at(&self, index: usize) -> CellId {
        let n = self.n as usize;
        CellId::new((index / n) as u32, (index % n) as u32)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cell_count()).map(move |i| self.cell_at(i))
    }

    pub fn cell_center(&self, cell: CellId) -> Point {
        Point::new(
            self.bbox.min_x + (cell.col as f64 + 0.5) * self.cell_width,
            self.bbox.min_y + (cell.row as f64 + 0.5) * self.cell_height,
        )
    }

    /// Cell containing `point`; points on the max edge fall in the last cell.
    pub fn locate(&self, point: Point) -> Result<CellId> {
        let b = &self.bbox;
        for (axis, value, min, max) in [("x", point.x, b.min_x, b.max_x), ("y", point.y, b.min_y, b.max_y)] {
            if !(value >= min && value <= max) {
                return Err(Error::OutOfDomain {
                    x: point.x,
                    y: point.y,
                    axis,
                    value,
                    min,
                    max,
                });
            }
        }
        let (gx, gy) = self.grid_coords(point);
        Ok(CellId::new(self.clamp_axis(gy), self.clamp_axis(gx)))
    }

    fn grid_coords(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.bbox.min_x) / self.cell_width,
            (p.y - self.bbox.min_y) / self.cell_height,
        )
    }

    fn clamp_axis(&self, g: f64) -> u32 {
        (g.floor().max(0.0) as u64).min(self.n as u64 - 1) as u32
    }

    fn check_cell(&self, cell: CellId) -> Result<()> {
        if self.contains_cell(cell) {
            Ok(())
        } else {
            Err(Error::invalid(format!("cell {cell} is outside a {0}x{0} grid", self.n)))
        }
    }

    /// The 8-neighborhood of `cell` clipped to the grid, in row-major order.
    pub fn neighbors(&self, cell: CellId) -> Result<Vec<CellId>> {
        self.check_cell(cell)?;
        Ok(self.neighbors_unchecked(cell).collect())
    }

    pub(crate) fn neighbors_unchecked(&self, cell: CellId) -> impl Iterator<Item = CellId> + '_ {
        DIRECTIONS.iter().filter_map(move |&(dr, dc)| self.offset(cell, dr, dc))
    }

    pub(crate) fn offset(&self, cell: CellId, dr: i64, dc: i64) -> Option<CellId> {
        let r = cell.row as i64 + dr;
        let c = cell.col as i64 + dc;
        let n = self.n as i64;
        (r >= 0 && r < n && c >= 0 && c < n).then(|| CellId::new(r as u32, c as u32))
    }

    /// Successors of `node` in the aggregated mobility model: a cell's
    /// neighbors followed by the virtual end, or every cell for a virtual node.
    pub fn aggregated_neighbors(&self, node: Node) -> Result<Vec<Node>> {
        match node {
            Node::Cell(cell) => {
                let mut out: Vec<Node> = self.neighbors(cell)?.into_iter().map(Node::Cell).collect();
                out.push(Node::End);
                Ok(out)
            }
            Node::Start | Node::End => Ok(self.cells().map(Node::Cell).collect()),
        }
    }

    /// Maps a raw trajectory onto cells, collapsing repeats and filling gaps
    /// between non-adjacent cells with the cells the connecting segment crosses.
    pub fn discretize(&self, traj: &RawTrajectory) -> Result<CellTrajectory> {
        let Some(first) = traj.points.first() else {
            return Err(Error::invalid(format!("trajectory '{}' has no points", traj.id)));
        };
        let mut cells = vec![self.locate(*first)?];
        for w in traj.points.windows(2) {
            let from = cells[cells.len() - 1];
            let to = self.locate(w[1])?;
            if to == from {
                continue;
            }
            if from.is_adjacent(&to) {
                cells.push(to);
            } else {
                self.supercover(w[0], w[1], from, to, &mut cells);
            }
        }
        CellTrajectory::new(cells)
    }

    /// Walks the cells crossed by segment `a`-`b`, appending every cell after
    /// `from` up to and including `to`. Corner crossings become diagonal moves.
    fn supercover(&self, a: Point, b: Point, from: CellId, to: CellId, out: &mut Vec<CellId>) {
        let (ax, ay) = self.grid_coords(a);
        let (bx, by) = self.grid_coords(b);
        let (dx, dy) = (bx - ax, by - ay);
        let n = self.n as i64;
        let mut col = from.col as i64;
        let mut row = from.row as i64;

        let axis = |d: f64, origin: f64, cell: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, (cell as f64 + 1.0 - origin) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (origin - cell as f64) / -d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, mut t_x, dt_x) = axis(dx, ax, col);
        let (step_y, mut t_y, dt_y) = axis(dy, ay, row);

        let budget = (to.row as i64 - from.row as i64).abs() + (to.col as i64 - from.col as i64).abs() + 2;
        let mut current = from;
        for _ in 0..budget {
            if current == to {
                break;
            }
            let tie = (t_x - t_y).abs() <= 1e-12 * t_x.abs().max(1.0);
            if tie {
                col += step_x;
                row += step_y;
                t_x += dt_x;
                t_y += dt_y;
            } else if t_x < t_y {
                col += step_x;
                t_x += dt_x;
            } else {
                row += step_y;
                t_y += dt_y;
            }
            col = col.clamp(0, n - 1);
            row = row.clamp(0, n - 1);
            let next = CellId::new(row as u32, col as u32);
            if next != current {
                out.push(next);
                current = next;
            }
        }
        // Floating-point drift can leave the walk short of `to`; finish with
        // king moves so adjacency still holds.
        while current != to {
            let step = |a: u32, b: u32| a as i64 + (b as i64 - a as i64).signum();
            current = CellId::new(step(current.row, to.row) as u32, step(current.col, to.col) as u32);
            out.push(current);
        }
    }
}

/// Real-valued grid side count that balances estimation noise against
/// non-uniformity error for range queries.
pub fn granularity_value(n_traj: f64, avg_points: f64, sampling_ratio: f64, epsilon: f64, lambda: f64) -> Result<f64> {
    for (name, v) in [
        ("trajectory count", n_traj),
        ("average points", avg_points),
        ("sampling ratio", sampling_ratio),
        ("epsilon", epsilon),
        ("lambda", lambda),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let x = epsilon * sampling_ratio / avg_points;
    // (e^x - 1)^2 / e^x, written to stay accurate for tiny x.
    let em1 = x.exp_m1();
    let core = n_traj * avg_points * em1 * em1 / x.exp();
    Ok(lambda * core.powf(0.25))
}

/// Grid granularity from dataset statistics, without spending budget.
/// The real-valued optimum is truncated, with a floor of 1.
pub fn select_granularity(
    n_traj: usize,
    avg_points: f64,
    sampling_ratio: f64,
    epsilon: f64,
    lambda: f64,
) -> Result<u32> {
    let v = granularity_value(n_traj as f64, avg_points, sampling_ratio, epsilon, lambda)?;
    Ok((v.floor() as u32).max(1))
}
