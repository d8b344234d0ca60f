//! `edge-ann`: build, query and benchmark anchor-pair tree indices.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use edge_ann::bench::{self, BenchConfig, BenchRow, SweepRow, LEAF_SWEEP};
use edge_ann::persist::{self, LoadedIndex};
use edge_ann::tree::{DEFAULT_LEAF_THRESHOLD, DEFAULT_NUM_TREES};
use edge_ann::vecstore::load_auto;
use edge_ann::{
    build_baseline_forest, build_forest, brute_force_knn, gen_synthetic, AnyForest, BuildConfig,
    DataGenSpec, IndexKind, OptimizerConfig, SearchParams, VecStore,
};
use serde::Serialize;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "edge-ann", version, about = "Anchor-pair tree ANN indices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from an fvecs or CSV file.
    Build(BuildArgs),
    /// Search an index and write ranked neighbors as CSV.
    Query(QueryArgs),
    /// Exact k-NN by linear scan, same CSV layout as `query`.
    Oracle(OracleArgs),
    /// Edge vs baseline recall/latency over a budget sweep.
    Bench(BenchArgs),
    /// Build time and recall across leaf sizes.
    SweepLeaf(SweepArgs),
    /// Build time over growing dataset sizes, with a log-log fit.
    Scale(ScaleArgs),
    /// Tree statistics and size accounting of an index file.
    Stats(StatsArgs),
    /// Write a synthetic Gaussian-mixture dataset.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Edge,
    Baseline,
}

/// Forest shape flags shared by every command that builds.
#[derive(Args, Clone, Debug)]
struct ForestArgs {
    /// Number of trees (t_n).
    #[arg(long, default_value_t = DEFAULT_NUM_TREES)]
    trees: usize,
    /// Leaf threshold T: subsets of at most T items become leaves.
    #[arg(long, default_value_t = DEFAULT_LEAF_THRESHOLD)]
    leaf: usize,
    /// Candidate pairs K kept by the anchor optimizer.
    #[arg(long, default_value_t = 8)]
    candidates: usize,
    #[arg(long, env = "EDGE_ANN_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl ForestArgs {
    fn config(&self) -> BuildConfig {
        BuildConfig {
            leaf_threshold: self.leaf,
            num_trees: self.trees,
            optimizer: OptimizerConfig {
                k_candidates: self.candidates,
                ..Default::default()
            },
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, value_enum, default_value_t = Kind::Edge)]
    kind: Kind,
    /// Leave vectors out of the index file; queries then need `--data`.
    #[arg(long)]
    no_embed_vectors: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Base vectors, required when the index does not embed them.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = edge_ann::search::DEFAULT_K)]
    k: usize,
    /// Distinct candidates gathered before ranking.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = edge_ann::search::DEFAULT_K)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = bench::DEFAULT_HOLDOUT)]
    holdout: usize,
    #[arg(long, default_value_t = edge_ann::search::DEFAULT_K)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 500, 1000, 2000])]
    budgets: Vec<usize>,
    #[command(flatten)]
    forest: ForestArgs,
    /// Size accounting without embedded vectors.
    #[arg(long)]
    no_embed_vectors: bool,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON comparison and build-time report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = LEAF_SWEEP)]
    leaf_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 500, 1000, 2000])]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = bench::DEFAULT_HOLDOUT)]
    holdout: usize,
    #[arg(long, default_value_t = edge_ann::search::DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [10_000, 20_000, 40_000, 80_000])]
    sizes: Vec<usize>,
    /// Builds per size; the fastest is kept.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON with the fitted slope and R².
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    clusters: usize,
    #[arg(long, default_value_t = 0.05)]
    stddev: f64,
    #[arg(long, env = "EDGE_ANN_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// `.csv` / `.txt` write CSV, anything else fvecs.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::SweepLeaf(a) => cmd_sweep_leaf(a),
        Command::Scale(a) => cmd_scale(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> Result<VecStore> {
    load_auto(path).with_context(|| format!("reading vectors from {}", path.display()))
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Serialize)]
struct BuildOutput {
    kind: &'static str,
    n: usize,
    dim: usize,
    num_trees: usize,
    leaf_threshold: usize,
    seed: u64,
    build_ms: f64,
    warnings: usize,
    size: persist::SizeReport,
}

fn kind_name(kind: IndexKind) -> &'static str {
    match kind {
        IndexKind::Edge => "edge",
        IndexKind::Baseline => "baseline",
    }
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let store = load(&a.input)?;
    let cfg = a.forest.config();
    let forest = match a.kind {
        Kind::Edge => AnyForest::Edge(build_forest(&store, &cfg)?),
        Kind::Baseline => AnyForest::Baseline(build_baseline_forest(&store, &cfg)?),
    };
    let (build_time, warnings) = match &forest {
        AnyForest::Edge(f) => (f.build_time(), f.warnings().len()),
        AnyForest::Baseline(f) => (f.build_time(), f.warnings().len()),
    };
    let (bytes, size) = forest.encode(&store, !a.no_embed_vectors)?;
    fs::write(&a.out, bytes).with_context(|| format!("writing {}", a.out.display()))?;
    emit(
        None,
        &to_json(&BuildOutput {
            kind: kind_name(forest.kind()),
            n: store.len(),
            dim: store.dim(),
            num_trees: cfg.num_trees,
            leaf_threshold: cfg.leaf_threshold,
            seed: cfg.seed,
            build_ms: build_time.unwrap_or_default().as_secs_f64() * 1e3,
            warnings,
            size,
        })?,
    )
}

fn open_index(path: &Path) -> Result<LoadedIndex> {
    persist::deserialize(path).with_context(|| format!("loading index {}", path.display()))
}

const RESULT_HEADER: &str = "query_idx,rank,id,dist\n";

fn push_rows(out: &mut String, qi: usize, neighbors: &[edge_ann::Neighbor]) {
    for (rank, n) in neighbors.iter().enumerate() {
        out.push_str(&format!("{qi},{rank},{},{}\n", n.id.0, n.dist));
    }
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let index = open_index(&a.index)?;
    let store = match (&a.data, index.store) {
        (Some(p), _) => load(p)?,
        (None, Some(s)) => s,
        (None, None) => bail!("index has no embedded vectors; pass --data"),
    };
    let queries = load(&a.queries)?;
    let params = SearchParams::new(a.k, a.budget)?;
    let mut out = String::from(RESULT_HEADER);
    for (qi, q) in queries.rows().enumerate() {
        let r = index
            .forest
            .query(&store, q, &params)
            .with_context(|| format!("query {qi}"))?;
        push_rows(&mut out, qi, &r.neighbors);
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let store = load(&a.data)?;
    let queries = load(&a.queries)?;
    let mut out = String::from(RESULT_HEADER);
    for (qi, q) in queries.rows().enumerate() {
        let r = brute_force_knn(&store, q, a.k).with_context(|| format!("query {qi}"))?;
        push_rows(&mut out, qi, &r.neighbors);
    }
    emit(a.out.as_deref(), &out)
}

#[derive(Serialize)]
struct BenchReport {
    comparison: bench::ComparisonReport,
    build_ms_edge: f64,
    build_ms_base: f64,
    rows: Vec<BenchRow>,
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let data = load(&a.data)?;
    let cfg = BenchConfig {
        holdout: a.holdout,
        k: a.k,
        budgets: a.budgets,
        build: a.forest.config(),
        seed: a.forest.seed,
        embed_vectors: !a.no_embed_vectors,
    };
    let out = bench::run_bench(&data, &cfg)?;
    let mut csv = format!("{}\n", BenchRow::CSV_HEADER);
    for row in &out.rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)?;
    if let Some(p) = &a.report {
        let report = BenchReport {
            comparison: out.comparison,
            build_ms_edge: out.build_ms_edge,
            build_ms_base: out.build_ms_base,
            rows: out.rows,
        };
        emit(Some(p), &to_json(&report)?)?;
    }
    Ok(())
}

fn cmd_sweep_leaf(a: SweepArgs) -> Result<()> {
    let data = load(&a.data)?;
    let rows = bench::sweep_leaf(
        &data,
        &a.leaf_sizes,
        &a.budgets,
        a.holdout,
        a.k,
        &a.forest.config(),
        a.forest.seed,
    )?;
    let mut csv = format!("{}\n", SweepRow::CSV_HEADER);
    for row in &rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)
}

fn cmd_scale(a: ScaleArgs) -> Result<()> {
    let data = load(&a.data)?;
    let report = bench::scale(&data, &a.sizes, &a.forest.config(), a.repeats)?;
    let mut csv = String::from("n,build_ms\n");
    for p in &report.points {
        csv.push_str(&format!("{},{:.3}\n", p.n, p.build_ms));
    }
    emit(a.out.as_deref(), &csv)?;
    eprintln!(
        "slope {:.4} (R² {:.4}) over {} sizes",
        report.slope,
        report.r_squared,
        report.points.len()
    );
    if let Some(p) = &a.report {
        emit(Some(p), &to_json(&report)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsOutput {
    kind: &'static str,
    header: persist::IndexHeader,
    internal_payload_bytes: usize,
    stats: edge_ann::StatsReport,
    size: persist::SizeReport,
    predicted: persist::SizePrediction,
    /// `|predicted − measured| / measured` for the whole file.
    predicted_delta: f64,
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let index = open_index(&a.index)?;
    let h = &index.header;
    let embedded = h.vectors_embedded();
    let kind = index.forest.kind();
    let size = index.forest.size_report(embedded);
    let predicted = persist::predict_size(
        h.n as usize,
        h.dim as usize,
        h.leaf_threshold as usize,
        h.num_trees as usize,
        kind,
        embedded,
    )?;
    let predicted_delta =
        (predicted.total_bytes as f64 - size.total_bytes as f64).abs() / size.total_bytes as f64;
    emit(
        None,
        &to_json(&StatsOutput {
            kind: kind_name(kind),
            header: h.clone(),
            internal_payload_bytes: kind.internal_payload(h.dim as usize),
            stats: index.forest.stats(),
            size,
            predicted,
            predicted_delta,
        })?,
    )
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let store = gen_synthetic(&DataGenSpec {
        n: a.n,
        dim: a.dim,
        cluster_count: a.clusters,
        cluster_stddev: a.stddev,
        seed: a.seed,
    })?;
    let csv = matches!(
        a.out.extension().and_then(|e| e.to_str()),
        Some(e) if e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("txt")
    );
    if csv {
        store.write_csv(&a.out)?;
    } else {
        store.write_fvecs(&a.out)?;
    }
    Ok(())
}
