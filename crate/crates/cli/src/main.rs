use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, LevelFilter};

use trajldp_core::datagen::{generate_corpus, GenConfig};
use trajldp_core::grid::{granularity_value, select_granularity};
use trajldp_core::metrics::MetricsConfig;
use trajldp_core::pipeline::{
    evaluate_corpora, load_corpus, privacy_ledger, report_text, run_attacks, run_pipeline, write_corpus, BBOX_MARGIN,
};
use trajldp_core::{BoundingBox, Grid, GridChoice, PipelineConfig, SeedStream};

#[derive(Parser)]
#[command(
    name = "trajldp",
    version,
    about = "Private trajectory synthesis under local differential privacy"
)]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic test corpus with hotspots and drifting walks.
    Generate(GenerateArgs),
    /// Grid side count for a dataset and budget.
    Gridsize(GridsizeArgs),
    /// Run the full private synthesis pipeline.
    Synthesize(SynthesizeArgs),
    /// Utility metrics between a real and a synthetic corpus.
    Evaluate(EvaluateArgs),
    /// Attack resilience of a synthetic corpus against the real one.
    Attack(AttackArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side count of the generating grid.
    #[arg(long, default_value_t = 6)]
    grid: u32,
    #[arg(long, default_value_t = 8.0)]
    mean_length: f64,
    #[arg(long, default_value_t = 4.0)]
    dispersion: f64,
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    drift: f64,
    #[arg(long, default_value_t = 1)]
    points_per_cell: usize,
}

#[derive(Args)]
struct GridsizeArgs {
    /// Corpus to take the trajectory count and average length from.
    #[arg(long, conflicts_with_all = ["trajectories", "avg_points"])]
    input: Option<PathBuf>,
    #[arg(long, requires = "avg_points")]
    trajectories: Option<usize>,
    #[arg(long, requires = "trajectories")]
    avg_points: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    sampling_ratio: f64,
    #[arg(long, default_value_t = 2.5)]
    lambda: f64,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// `key = value` file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Side count, or "auto".
    #[arg(long)]
    grid: Option<GridChoice>,
    #[arg(long)]
    sampling_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    metrics: Option<bool>,
    #[arg(long)]
    attacks: Option<bool>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    query_ratio: Option<f64>,
    #[arg(long)]
    attack_targets: Option<usize>,
    #[arg(long)]
    outlier_fraction: Option<f64>,
    #[arg(long)]
    dump_reports: Option<bool>,
}

#[derive(Args)]
struct CorpusPair {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    /// Side count of the evaluation grid over both corpora.
    #[arg(long, default_value_t = 6)]
    grid: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpora: CorpusPair,
    #[arg(long, default_value_t = trajldp_core::metrics::DEFAULT_QUERIES)]
    queries: usize,
    #[arg(long, default_value_t = trajldp_core::metrics::DEFAULT_QUERY_RATIO)]
    query_ratio: f64,
    /// Print a single `key=value` record instead of a table.
    #[arg(long)]
    record: bool,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    corpora: CorpusPair,
    #[arg(long, default_value_t = 200)]
    attack_targets: usize,
    #[arg(long, default_value_t = 0.01)]
    outlier_fraction: f64,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Gridsize(args) => gridsize(args),
        Command::Synthesize(args) => synthesize(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Attack(args) => attack(args),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    if args.grid == 0 {
        bail!("--grid must be at least 1");
    }
    let mut config = GenConfig::new(args.size, args.seed);
    if args.grid != config.n {
        // The default hotspots are laid out for a 6x6 grid.
        config.start_hotspots.clear();
        config.end_hotspots = vec![(trajldp_core::CellId::new(args.grid - 1, args.grid - 1), 1.0)];
        config.n = args.grid;
    }
    config.mean_length = args.mean_length;
    config.dispersion = args.dispersion;
    config.max_length = args.max_length;
    config.drift = args.drift;
    config.points_per_cell = args.points_per_cell;
    let corpus = generate_corpus(&config)?;
    write_corpus(&args.output, &corpus)?;
    info!("wrote {} trajectories to {}", corpus.len(), args.output.display());
    Ok(())
}

fn gridsize(args: GridsizeArgs) -> Result<()> {
    let (count, avg) = match (&args.input, args.trajectories, args.avg_points) {
        (Some(path), _, _) => {
            let (corpus, _) = load_corpus(path)?;
            let avg = corpus.iter().map(|t| t.len()).sum::<usize>() as f64 / corpus.len() as f64;
            (corpus.len(), avg)
        }
        (None, Some(t), Some(a)) => (t, a),
        _ => bail!("give either --input or both --trajectories and --avg-points"),
    };
    let value = granularity_value(count as f64, avg, args.sampling_ratio, args.epsilon, args.lambda)?;
    let n = select_granularity(count, avg, args.sampling_ratio, args.epsilon, args.lambda)?;
    println!("trajectories={count} avg_points={avg:.6} value={value:.6} grid={n}");
    Ok(())
}

fn synthesize(args: SynthesizeArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field {
                config.$field = v;
            })*
        };
    }
    apply!(
        epsilon,
        k,
        alpha,
        beta,
        lambda,
        grid,
        sampling_ratio,
        seed,
        repetitions,
        metrics,
        attacks,
        queries,
        query_ratio,
        attack_targets,
        outlier_fraction,
        dump_reports
    );
    if args.input.is_some() {
        config.input = args.input;
    }
    if args.output.is_some() {
        config.output = args.output;
    }
    let result = run_pipeline(&config)?;
    for line in privacy_ledger(&result, config.epsilon).lines() {
        info!("{line}");
    }
    print!("{}", report_text(&result, &config));
    Ok(())
}

fn load_pair(pair: &CorpusPair) -> Result<(Vec<trajldp_core::RawTrajectory>, Vec<trajldp_core::RawTrajectory>)> {
    let load = |p: &Path| load_corpus(p).with_context(|| format!("loading {}", p.display()));
    let (real, _) = load(&pair.real)?;
    let (syn, _) = load(&pair.synthetic)?;
    Ok((real, syn))
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let (real, syn) = load_pair(&args.corpora)?;
    let config = MetricsConfig {
        n_queries: args.queries,
        query_ratio: args.query_ratio,
        seed: args.corpora.seed,
        ..MetricsConfig::default()
    };
    let report = evaluate_corpora(&real, &syn, args.corpora.grid, &config)?;
    if args.record {
        println!("{}", report.to_record());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn attack(args: AttackArgs) -> Result<()> {
    let (real, syn) = load_pair(&args.corpora)?;
    let bbox = BoundingBox::enclosing(real.iter().chain(&syn).flat_map(|t| &t.points), BBOX_MARGIN)?;
    let grid = Grid::new(bbox, args.corpora.grid)?;
    let config = PipelineConfig {
        attack_targets: args.attack_targets,
        outlier_fraction: args.outlier_fraction,
        ..PipelineConfig::default()
    };
    config.validate()?;
    let (reid, outlier) = run_attacks(&real, &syn, &grid, &config, SeedStream::new(args.corpora.seed))?;
    for (name, o) in [("reidentification", &reid), ("outlier", &outlier)] {
        println!(
            "attack={name} targets={} sim_max={:.6} threshold={:.6}",
            o.matches.len(),
            o.sim_max,
            o.threshold
        );
        for (kappa, v) in o.sweep() {
            println!("attack={name} kappa={kappa} resilience={v:.6}");
        }
    }
    Ok(())
}
