//! End-to-end runs: ingestion, the two-round protocol, synthesis, evaluation,
//! attacks and artifact files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde_json::json;

use crate::attacks::{outlier_attack, reidentification_attack, restrict_to_zone, AttackConfig, AttackOutcome};
use crate::client::{
    length_budget, plan_budget, report_length, report_round_two, ClientReportBundle, PrivacyBudget, TransitionDomain,
};
use crate::curator::{LengthDistribution, MobilityModel, TransitionAggregators};
use crate::error::{Error, Result};
use crate::grid::{select_granularity, BoundingBox, CellTrajectory, Grid, RawTrajectory};
use crate::metrics::{evaluate, Corpus, MetricsConfig, UtilityReport};
use crate::oue::Aggregator;
use crate::rng::SeedStream;
use crate::synth::{realize_all, synthesize_dataset, SynthesisConfig};

const ROUND_ONE: u64 = 1;
const ROUND_TWO: u64 = 2;
const SYNTHESIS: u64 = 3;
const REALIZE_SYNTHETIC: u64 = 4;
const REALIZE_REAL: u64 = 5;
const METRICS: u64 = 6;
const ATTACKS: u64 = 7;

/// Fraction by which the tight corpus bounds are grown.
pub const BBOX_MARGIN: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Auto,
    Fixed(u32),
}

impl FromStr for GridChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GridChoice::Auto);
        }
        s.parse::<u32>()
            .ok()
            .filter(|n| *n >= 1)
            .map(GridChoice::Fixed)
            .ok_or_else(|| Error::Config(format!("grid must be 'auto' or a positive integer, got '{s}'")))
    }
}

impl std::fmt::Display for GridChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridChoice::Auto => f.write_str("auto"),
            GridChoice::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub epsilon: f64,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub grid: GridChoice,
    /// Sampling ratio of the raw data, used by the automatic grid size.
    pub sampling_ratio: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub metrics: bool,
    pub attacks: bool,
    pub queries: usize,
    pub query_ratio: f64,
    /// Cap on the number of real trajectories attacked by re-identification.
    pub attack_targets: usize,
    pub outlier_fraction: f64,
    /// Also write every user's wire-format reports.
    pub dump_reports: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            output: None,
            epsilon: 1.0,
            k: 0.9,
            alpha: 0.3,
            beta: 0.2,
            lambda: 2.5,
            grid: GridChoice::Auto,
            sampling_ratio: 1.0,
            seed: 0,
            repetitions: 1,
            metrics: true,
            attacks: true,
            queries: 200,
            query_ratio: 1.0 / 9.0,
            attack_targets: 200,
            outlier_fraction: 0.01,
            dump_reports: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("'{key}' expects true or false, got '{value}'"))),
    }
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 18] = [
        "input",
        "output",
        "epsilon",
        "k",
        "alpha",
        "beta",
        "lambda",
        "grid",
        "sampling_ratio",
        "seed",
        "repetitions",
        "metrics",
        "attacks",
        "queries",
        "query_ratio",
        "attack_targets",
        "outlier_fraction",
        "dump_reports",
    ];

    /// Sets the field named `key` from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "lambda" => self.lambda = parse_value(key, value)?,
            "grid" => self.grid = value.parse()?,
            "sampling_ratio" => self.sampling_ratio = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "repetitions" => self.repetitions = parse_value(key, value)?,
            "metrics" => self.metrics = parse_bool(key, value)?,
            "attacks" => self.attacks = parse_bool(key, value)?,
            "queries" => self.queries = parse_value(key, value)?,
            "query_ratio" => self.query_ratio = parse_value(key, value)?,
            "attack_targets" => self.attack_targets = parse_value(key, value)?,
            "outlier_fraction" => self.outlier_fraction = parse_value(key, value)?,
            "dump_reports" => self.dump_reports = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected 'key = value'".into()))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = PipelineConfig::default();
        config.apply_text(&text, path)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be positive and finite, got {}", self.epsilon));
        }
        if !(self.k > 0.0 && self.k <= 1.0) {
            return fail(format!("k must be in (0, 1], got {}", self.k));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return fail(format!(
                "alpha and beta must be non-negative, got {} and {}",
                self.alpha, self.beta
            ));
        }
        if !(self.lambda > 0.0) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.sampling_ratio > 0.0 && self.sampling_ratio <= 1.0) {
            return fail(format!("sampling_ratio must be in (0, 1], got {}", self.sampling_ratio));
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.queries == 0 || !(self.query_ratio > 0.0 && self.query_ratio <= 1.0) {
            return fail("queries must be positive and query_ratio in (0, 1]".into());
        }
        if self.attack_targets == 0 || !(self.outlier_fraction > 0.0 && self.outlier_fraction <= 1.0) {
            return fail("attack_targets must be positive and outlier_fraction in (0, 1]".into());
        }
        Ok(())
    }

    /// `key = value` lines that [`apply_text`](Self::apply_text) reads back.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = String::new();
        for key in Self::KEYS {
            let value = match key {
                "input" => path(&self.input),
                "output" => path(&self.output),
                "epsilon" => Some(self.epsilon.to_string()),
                "k" => Some(self.k.to_string()),
                "alpha" => Some(self.alpha.to_string()),
                "beta" => Some(self.beta.to_string()),
                "lambda" => Some(self.lambda.to_string()),
                "grid" => Some(self.grid.to_string()),
                "sampling_ratio" => Some(self.sampling_ratio.to_string()),
                "seed" => Some(self.seed.to_string()),
                "repetitions" => Some(self.repetitions.to_string()),
                "metrics" => Some(self.metrics.to_string()),
                "attacks" => Some(self.attacks.to_string()),
                "queries" => Some(self.queries.to_string()),
                "query_ratio" => Some(self.query_ratio.to_string()),
                "attack_targets" => Some(self.attack_targets.to_string()),
                "outlier_fraction" => Some(self.outlier_fraction.to_string()),
                "dump_reports" => Some(self.dump_reports.to_string()),
                _ => unreachable!(),
            };
            if let Some(v) = value {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

/// Parses corpus text: one `id;x,y x,y ...` line per trajectory, where a
/// point may carry a third, ignored field.
pub fn parse_corpus(text: &str, path: &Path) -> Result<Vec<RawTrajectory>> {
    let mut corpus = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, rest) = line
            .split_once(';')
            .ok_or_else(|| err("expected '<id>;<x>,<y> ...'".into()))?;
        let mut points = Vec::new();
        for token in rest.split_whitespace() {
            let fields: Vec<&str> = token.split(',').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err(format!("malformed point '{token}'")));
            }
            let coord = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad coordinate '{s}' in point '{token}'")))
            };
            points.push(crate::grid::Point::new(coord(fields[0])?, coord(fields[1])?));
        }
        if points.is_empty() {
            return Err(err(format!("trajectory '{id}' has no points")));
        }
        corpus.push(RawTrajectory::new(id.trim(), points));
    }
    if corpus.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "corpus contains no trajectories".into(),
        });
    }
    Ok(corpus)
}

/// Reads a corpus and its bounding box, the tight bounds grown by 0.1%.
pub fn load_corpus(path: &Path) -> Result<(Vec<RawTrajectory>, BoundingBox)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corpus = parse_corpus(&text, path)?;
    let bbox = corpus_bbox(&corpus)?;
    Ok((corpus, bbox))
}

pub fn corpus_bbox(corpus: &[RawTrajectory]) -> Result<BoundingBox> {
    BoundingBox::enclosing(corpus.iter().flat_map(|t| &t.points), BBOX_MARGIN)
}

/// Shortest round-trip formatting, so reading the text back is exact.
pub fn format_corpus(corpus: &[RawTrajectory]) -> String {
    let mut out = String::new();
    for t in corpus {
        out.push_str(&t.id);
        out.push(';');
        for (i, p) in t.points.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{},{}", p.x, p.y);
        }
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, corpus: &[RawTrajectory]) -> Result<()> {
    fs::write(path, format_corpus(corpus)).map_err(|e| Error::io(path, e))
}

/// What the curator learns from one run of the protocol.
#[derive(Debug, Clone)]
pub struct CuratorOutput {
    pub length_dist: LengthDistribution,
    pub l_k: usize,
    pub budget: PrivacyBudget,
    pub model: MobilityModel,
    /// Largest budget any single user spent.
    pub max_consumed: f64,
    /// Every user's reports, kept only on request.
    pub bundles: Option<Vec<ClientReportBundle>>,
}

/// Simulates both rounds for every user and aggregates the reports. User
/// `i` draws from stream `i` of the round's child seed.
pub fn run_protocol(
    cells: &[CellTrajectory],
    grid: &Grid,
    epsilon: f64,
    k: f64,
    streams: SeedStream,
    keep_reports: bool,
) -> Result<CuratorOutput> {
    if cells.is_empty() {
        return Err(Error::invalid("no trajectories to report"));
    }
    let eps_length = length_budget(epsilon)?;
    let round_one = streams.derive(ROUND_ONE);
    let length_reports: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(i, t)| report_length(t, grid.cell_count(), eps_length, &mut round_one.rng(i as u64)))
        .collect::<Result<_>>()?;
    let lengths = length_reports
        .par_iter()
        .try_fold(
            || Aggregator::new(grid.cell_count()),
            |mut agg, r| agg.add(r).map(|_| agg),
        )
        .try_reduce(|| Aggregator::new(grid.cell_count()), |mut a, b| a.merge(&b).map(|_| a))?;
    let length_dist = LengthDistribution::from_estimate(&lengths.finalize())?;
    let l_k = length_dist.quantile(k)?;
    let budget = plan_budget(epsilon, l_k)?;
    info!("round one: {} length reports, L_k = {l_k}", cells.len());

    let domain = TransitionDomain::new(grid);
    let round_two = streams.derive(ROUND_TWO);
    let reports: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(i, t)| report_round_two(t, &domain, &budget, &mut round_two.rng(i as u64)))
        .collect::<Result<_>>()?;
    let aggregators = reports
        .par_iter()
        .try_fold(
            || TransitionAggregators::new(&domain),
            |mut agg, r| agg.add(r).map(|_| agg),
        )
        .try_reduce(
            || TransitionAggregators::new(&domain),
            |mut a, b| a.merge(&b).map(|_| a),
        )?;
    let model = aggregators.build_model(&domain)?;
    let max_consumed = reports
        .iter()
        .map(|r| budget.consumed(r.transitions.len()))
        .fold(0.0, f64::max);
    info!(
        "round two: {} users, per-transition epsilon {}",
        reports.len(),
        budget.per_transition
    );

    let bundles = keep_reports.then(|| {
        length_reports
            .into_iter()
            .zip(reports)
            .map(|(l, r)| ClientReportBundle::new(l, r))
            .collect()
    });
    Ok(CuratorOutput {
        length_dist,
        l_k,
        budget,
        model,
        max_consumed,
        bundles,
    })
}

/// Grid side count chosen for a corpus under `config`.
pub fn choose_grid(corpus: &[RawTrajectory], bbox: BoundingBox, config: &PipelineConfig) -> Result<Grid> {
    let n = match config.grid {
        GridChoice::Fixed(n) => n,
        GridChoice::Auto => {
            let avg = corpus.iter().map(|t| t.len()).sum::<usize>() as f64 / corpus.len() as f64;
            select_granularity(corpus.len(), avg, config.sampling_ratio, config.epsilon, config.lambda)?
        }
    };
    Grid::new(bbox, n)
}

/// Outcome of one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionRun {
    pub repetition: usize,
    pub curator: CuratorOutput,
    pub synthetic_cells: Vec<CellTrajectory>,
    pub synthetic: Vec<RawTrajectory>,
    pub report: Option<UtilityReport>,
    pub reidentification: Option<AttackOutcome>,
    pub outlier: Option<AttackOutcome>,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub grid: Grid,
    pub runs: Vec<RepetitionRun>,
}

impl PipelineResult {
    pub fn reports(&self) -> Vec<UtilityReport> {
        self.runs.iter().filter_map(|r| r.report).collect()
    }
}

/// Runs every repetition on an in-memory corpus without touching the disk.
///
/// The real corpus enters the metrics and attacks in the same form as the
/// synthetic one: discretized, then realized with one point per cell.
pub fn run_on_corpus(corpus: &[RawTrajectory], bbox: BoundingBox, config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("input corpus is empty"));
    }
    let grid = choose_grid(corpus, bbox, config)?;
    info!("grid {0}x{0} over {1} trajectories", grid.n(), corpus.len());
    let cells: Vec<CellTrajectory> = corpus.par_iter().map(|t| grid.discretize(t)).collect::<Result<_>>()?;
    let root = SeedStream::new(config.seed);
    let runs = (0..config.repetitions)
        .map(|r| run_repetition(r, &cells, &grid, config, root.derive(r as u64)))
        .collect::<Result<_>>()?;
    Ok(PipelineResult { grid, runs })
}

fn run_repetition(
    repetition: usize,
    cells: &[CellTrajectory],
    grid: &Grid,
    config: &PipelineConfig,
    streams: SeedStream,
) -> Result<RepetitionRun> {
    let curator = run_protocol(cells, grid, config.epsilon, config.k, streams, config.dump_reports)?;
    let synth_config = SynthesisConfig::new(config.alpha, config.beta, cells.len(), streams.derive(SYNTHESIS).seed())?;
    let synthetic_cells = synthesize_dataset(&curator.length_dist, &curator.model, &synth_config)?;
    let synthetic: Vec<RawTrajectory> = realize_all(grid, &synthetic_cells, streams.derive(REALIZE_SYNTHETIC))
        .into_iter()
        .map(|mut t| {
            t.id = format!("s{}", t.id);
            t
        })
        .collect();
    info!("repetition {repetition}: synthesized {} trajectories", synthetic.len());

    let needs_real_points = config.metrics || config.attacks;
    let real_points = if needs_real_points {
        realize_all(grid, cells, streams.derive(REALIZE_REAL))
    } else {
        Vec::new()
    };
    let report = if config.metrics {
        let metrics_config = MetricsConfig {
            n_queries: config.queries,
            query_ratio: config.query_ratio,
            seed: streams.derive(METRICS).seed(),
            ..MetricsConfig::default()
        };
        let real = Corpus {
            cells,
            points: &real_points,
        };
        let syn = Corpus {
            cells: &synthetic_cells,
            points: &synthetic,
        };
        Some(evaluate(real, syn, grid, &metrics_config)?)
    } else {
        None
    };
    let (reidentification, outlier) = if config.attacks {
        let (a, b) = run_attacks(&real_points, &synthetic, grid, config, streams.derive(ATTACKS))?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(RepetitionRun {
        repetition,
        curator,
        synthetic_cells,
        synthetic,
        report,
        reidentification,
        outlier,
    })
}

/// Re-identification over a random sample of at most `attack_targets` real
/// trajectories that enter the sensitive zone, then the outlier attack.
pub fn run_attacks(
    real: &[RawTrajectory],
    syn: &[RawTrajectory],
    grid: &Grid,
    config: &PipelineConfig,
    streams: SeedStream,
) -> Result<(AttackOutcome, AttackOutcome)> {
    let mut attack = AttackConfig::new(grid);
    attack.outlier_fraction = config.outlier_fraction;
    let zone = attack.zone.iter().copied().collect();
    let mut candidates: Vec<usize> = (0..real.len())
        .filter(|&i| !restrict_to_zone(&real[i], grid, &zone).is_empty())
        .collect();
    candidates.shuffle(&mut streams.rng(0));
    candidates.truncate(config.attack_targets);
    candidates.sort_unstable();
    let attacked: Vec<RawTrajectory> = candidates.iter().map(|&i| real[i].clone()).collect();
    let reid = reidentification_attack(syn, &attacked, grid, &attack)?;
    let outlier = outlier_attack(real, syn, &attack)?;
    Ok((reid, outlier))
}

/// Mean and sample standard deviation of each metric over the reports.
pub fn summarize(reports: &[UtilityReport]) -> Vec<(&'static str, f64, f64)> {
    let n = reports.len() as f64;
    UtilityReport::NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = reports.iter().map(|r| r.values()[j]).collect();
            let mean = values.iter().sum::<f64>() / n;
            let sd = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (*name, mean, sd)
        })
        .collect()
}

/// Per-round budget lines for every repetition.
pub fn privacy_ledger(result: &PipelineResult, epsilon: f64) -> String {
    let mut out = String::new();
    for run in &result.runs {
        let b = &run.curator.budget;
        let r = run.repetition;
        let transitions = b.per_transition * b.l_k as f64;
        let endpoints = b.per_transition * 2.0;
        let _ = writeln!(
            out,
            "repetition={r} round=1 report=length count=1 epsilon={}",
            b.eps_length
        );
        let _ = writeln!(
            out,
            "repetition={r} round=2 report=transition count={} per_report={} epsilon={transitions}",
            b.l_k, b.per_transition
        );
        let _ = writeln!(
            out,
            "repetition={r} round=2 report=endpoint count=2 per_report={} epsilon={endpoints}",
            b.per_transition
        );
        let _ = writeln!(
            out,
            "repetition={r} total={} target={epsilon} max_user_consumed={}",
            b.eps_length + b.eps_transitions,
            run.curator.max_consumed
        );
    }
    out
}

pub fn report_text(result: &PipelineResult, config: &PipelineConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "grid={}", result.grid.n());
    let _ = writeln!(out, "epsilon={}", config.epsilon);
    let _ = writeln!(out, "repetitions={}", config.repetitions);
    for run in &result.runs {
        let _ = write!(
            out,
            "repetition={} l_k={} synthetic={}",
            run.repetition,
            run.curator.l_k,
            run.synthetic.len()
        );
        if let Some(rep) = &run.report {
            let _ = write!(out, " {}", rep.to_record());
        }
        out.push('\n');
    }
    let reports = result.reports();
    if !reports.is_empty() {
        for (name, mean, sd) in summarize(&reports) {
            let _ = writeln!(out, "summary metric={name} mean={mean:.6} stddev={sd:.6}");
        }
    }
    out
}

fn attack_json(o: &AttackOutcome) -> serde_json::Value {
    json!({
        "sim_max": o.sim_max,
        "threshold": o.threshold,
        "targets": o.matches.len(),
        "sweep": o.sweep().iter().map(|(k, v)| json!({"kappa": k, "resilience": v})).collect::<Vec<_>>(),
    })
}

/// One JSON object per repetition.
pub fn records_jsonl(result: &PipelineResult, config: &PipelineConfig) -> String {
    let mut out = String::new();
    for run in &result.runs {
        let metrics = run.report.map(|r| {
            r.fields()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect::<serde_json::Map<_, _>>()
        });
        let record = json!({
            "repetition": run.repetition,
            "grid": result.grid.n(),
            "epsilon": config.epsilon,
            "l_k": run.curator.l_k,
            "synthetic": run.synthetic.len(),
            "metrics": metrics,
            "reidentification": run.reidentification.as_ref().map(attack_json),
            "outlier": run.outlier.as_ref().map(attack_json),
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

pub fn attack_sweep_text(result: &PipelineResult) -> String {
    let mut out = String::new();
    for run in &result.runs {
        for (name, outcome) in [("reidentification", &run.reidentification), ("outlier", &run.outlier)] {
            if let Some(o) = outcome {
                for (kappa, v) in o.sweep() {
                    let _ = writeln!(
                        out,
                        "repetition={} attack={name} kappa={kappa} resilience={v:.6}",
                        run.repetition
                    );
                }
            }
        }
    }
    out
}

/// Writes every artifact of `result` into `dir` and returns the paths.
pub fn write_artifacts(dir: &Path, result: &PipelineResult, config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for run in &result.runs {
        let r = run.repetition;
        put(format!("synthetic-{r}.txt"), format_corpus(&run.synthetic).into_bytes())?;
        put(format!("model-{r}.txt"), run.curator.model.to_text().into_bytes())?;
        if let Some(bundles) = &run.curator.bundles {
            put(
                format!("reports-{r}.bin"),
                bundles.iter().flat_map(|b| b.to_bytes()).collect(),
            )?;
        }
    }
    // The output location is left out so identical runs produce identical files.
    let echoed = PipelineConfig {
        output: None,
        ..config.clone()
    };
    put("config.txt".into(), echoed.to_text().into_bytes())?;
    put(
        "privacy_ledger.txt".into(),
        privacy_ledger(result, config.epsilon).into_bytes(),
    )?;
    put("report.txt".into(), report_text(result, config).into_bytes())?;
    put("records.jsonl".into(), records_jsonl(result, config).into_bytes())?;
    if config.attacks {
        put("attacks.txt".into(), attack_sweep_text(result).into_bytes())?;
    }
    Ok(written)
}

/// Loads `config.input`, runs every repetition and, when `config.output` is
/// set, writes the artifacts there.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let input = config
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input corpus given".into()))?;
    let (corpus, bbox) = load_corpus(input)?;
    let result = run_on_corpus(&corpus, bbox, config)?;
    if let Some(dir) = &config.output {
        write_artifacts(dir, &result, config)?;
    }
    Ok(result)
}

/// Metrics between two point corpora on an `n`-sided grid over their joint
/// bounds; each corpus is used as given.
pub fn evaluate_corpora(
    real: &[RawTrajectory],
    syn: &[RawTrajectory],
    n: u32,
    config: &MetricsConfig,
) -> Result<UtilityReport> {
    let bbox = BoundingBox::enclosing(real.iter().chain(syn).flat_map(|t| &t.points), BBOX_MARGIN)?;
    let grid = Grid::new(bbox, n)?;
    let real_cells: Vec<CellTrajectory> = real.par_iter().map(|t| grid.discretize(t)).collect::<Result<_>>()?;
    let syn_cells: Vec<CellTrajectory> = syn.par_iter().map(|t| grid.discretize(t)).collect::<Result<_>>()?;
    evaluate(
        Corpus {
            cells: &real_cells,
            points: real,
        },
        Corpus {
            cells: &syn_cells,
            points: syn,
        },
        &grid,
        config,
    )
}
