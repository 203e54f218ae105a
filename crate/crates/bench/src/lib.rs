//! Shared fixtures for the benchmarks.

use trajldp_core::datagen::{generate_corpus, GenConfig};
use trajldp_core::pipeline::{corpus_bbox, run_protocol, CuratorOutput};
use trajldp_core::{CellTrajectory, Grid, RawTrajectory, SeedStream};

pub struct Fixture {
    pub raw: Vec<RawTrajectory>,
    pub grid: Grid,
    pub cells: Vec<CellTrajectory>,
}

pub fn fixture(size: usize, n: u32) -> Fixture {
    let raw = generate_corpus(&GenConfig::new(size, 17)).expect("valid generator config");
    let grid = Grid::new(corpus_bbox(&raw).expect("non-empty corpus"), n).expect("valid grid");
    let cells = raw.iter().map(|t| grid.discretize(t).expect("in bounds")).collect();
    Fixture { raw, grid, cells }
}

pub fn curator(f: &Fixture, epsilon: f64) -> CuratorOutput {
    run_protocol(&f.cells, &f.grid, epsilon, 0.9, SeedStream::new(5), false).expect("protocol runs")
}
