//! Command-line interface: dataset generation and import, cap-volume
//! tables, graph construction, long-edge attachment, search runs, the
//! two-space pipeline, and the benchmark suites.
//!
//! Thread count is rayon's default; set `RAYON_NUM_THREADS` to override.
//! Results are independent of the thread count.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use proxgraph::bench;
use proxgraph::data::{self, Dataset, Metric};
use proxgraph::geometry::{
    cap_volume, cap_volume_mc, intersection_volume, intersection_volume_mc, CapSpec,
    IntersectionSpec,
};
use proxgraph::graph::{
    build_knn, build_threshold_dense, build_threshold_sparse, graph_stats, SearchGraph,
};
use proxgraph::graphio::{load_graph, save_graph};
use proxgraph::long_edges::{
    attach, default_edges_per_node, sample_long_edges, LongEdgeConfig, LongEdgeScheme,
};
use proxgraph::rerank::{fit_transform, rerank_query_set, Transform, TransformKind, TransformSpec};
use proxgraph::search::{
    aggregate, evaluate_query_set, Algorithm, SearchConfig, SearchResult, StartRule,
};
use proxgraph::vecio::{
    load_dataset, load_queries, load_vectors_with, save_dataset, save_queries, VectorFormat,
};

#[derive(Parser)]
#[command(name = "proxgraph", version, about = "Proximity-graph nearest-neighbor search on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spherical-cap volume tables.
    Caps {
        #[command(subcommand)]
        command: CapsCommand,
    },
    /// Dataset generation, import, queries, histograms.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Graph construction and long-range edges.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Query execution.
    Search {
        #[command(subcommand)]
        command: SearchCommand,
    },
    /// Two-space (transform + rerank) pipeline.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// Benchmark plans and validation suites.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

// ---------------------------------------------------------------------------
// caps
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum CapsCommand {
    /// Tabulate cap volumes C(gamma) and intersection volumes
    /// W(alpha, beta, theta) as CSV: d, gamma (or alpha,beta,theta), method,
    /// value, stderr.
    Tabulate(CapsTabulate),
}

#[derive(Args)]
struct CapsTabulate {
    /// Sphere dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    dims: Vec<u32>,
    /// Cap heights gamma, comma separated.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    /// Intersection alpha values (with --betas and --thetas, crossed).
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    thetas: Vec<f64>,
    /// Add Monte Carlo rows with this many samples.
    #[arg(long)]
    mc_samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run_caps(cmd: CapsTabulate) -> Result<()> {
    println!("d,gamma,alpha,beta,theta,method,value,stderr");
    for &d in &cmd.dims {
        for &gamma in &cmd.gammas {
            let spec = CapSpec::new(gamma, d)?;
            let q = cap_volume(spec);
            println!("{d},{gamma},,,,quadrature,{},{}", q.value, q.stderr);
            if let Some(samples) = cmd.mc_samples {
                let mc = cap_volume_mc(spec, samples, cmd.seed)?;
                println!("{d},{gamma},,,,monte-carlo,{},{}", mc.value, mc.stderr);
            }
        }
        for &alpha in &cmd.alphas {
            for &beta in &cmd.betas {
                for &theta in &cmd.thetas {
                    let spec = IntersectionSpec::new(alpha, beta, theta, d)?;
                    let q = intersection_volume(spec);
                    println!("{d},,{alpha},{beta},{theta},quadrature,{},{}", q.value, q.stderr);
                    if let Some(samples) = cmd.mc_samples {
                        let mc = intersection_volume_mc(spec, samples, cmd.seed)?;
                        println!(
                            "{d},,{alpha},{beta},{theta},monte-carlo,{},{}",
                            mc.value, mc.stderr
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// data
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum DataCommand {
    /// Generate a uniform spherical dataset.
    Gen {
        #[arg(long)]
        n: usize,
        /// Sphere dimension d (points live in R^(d+1)).
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output base path (writes BASE.fvecs and BASE.meta.toml).
        #[arg(long)]
        out: PathBuf,
    },
    /// Import an fvecs/bvecs file (normalizing onto the sphere).
    Import {
        #[arg(long)]
        path: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long, value_enum, default_value = "spherical")]
        metric: MetricArg,
        #[arg(long)]
        id: Option<String>,
        /// Keep only the first N vectors.
        #[arg(long)]
        take: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive nearest-neighbor distance histogram as CSV.
    NnHist {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a query set (planted or uniform) with exhaustive ground
    /// truth.
    Queries {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "planted")]
        mode: QueryModeArg,
        #[arg(long)]
        m: usize,
        /// Planted geodesic radius (required for planted mode).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Fvecs,
    Bvecs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Spherical,
    Euclidean,
    Angular,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryModeArg {
    Planted,
    Uniform,
}

impl From<FormatArg> for VectorFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Fvecs => VectorFormat::Fvecs,
            FormatArg::Bvecs => VectorFormat::Bvecs,
        }
    }
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Spherical => Metric::Spherical,
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Angular => Metric::Angular,
        }
    }
}

fn run_data(cmd: DataCommand) -> Result<()> {
    match cmd {
        DataCommand::Gen { n, d, seed, out } => {
            let ds = data::generate_uniform(n, d, seed)?;
            save_dataset(&out, &ds)?;
            eprintln!("wrote {} points on S^{d} to {}", ds.n(), out.display());
        }
        DataCommand::Import {
            path,
            format,
            metric,
            id,
            take,
            out,
        } => {
            let id = id.unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            let mut ds = load_vectors_with(&path, format.into(), true, metric.into(), id)?;
            if let Some(t) = take {
                if t < ds.n() {
                    ds = Dataset::from_vectors(
                        format!("{}-first{t}", ds.id()),
                        ds.dim(),
                        ds.metric(),
                        ds.points_flat()[..t * ds.dim()].to_vec(),
                        false,
                    )?;
                }
            }
            save_dataset(&out, &ds)?;
            eprintln!(
                "imported {} vectors of dimension {} to {}",
                ds.n(),
                ds.dim(),
                out.display()
            );
        }
        DataCommand::NnHist { data, bins, out } => {
            let ds = load_dataset(&data)?;
            let hist = data::nn_distance_histogram(&ds, bins)?;
            let mut text = String::from("bin_lo,bin_hi,count\n");
            for (i, &c) in hist.counts.iter().enumerate() {
                text.push_str(&format!("{},{},{}\n", hist.edges[i], hist.edges[i + 1], c));
            }
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        DataCommand::Queries {
            data,
            mode,
            m,
            radius,
            seed,
            out,
        } => {
            let ds = load_dataset(&data)?;
            let qs = match mode {
                QueryModeArg::Planted => {
                    let r = radius.context("planted mode needs --radius")?;
                    data::plant_queries(&ds, m, r, seed)?
                }
                QueryModeArg::Uniform => data::sample_queries_uniform(&ds, m, seed)?,
            };
            save_queries(&out, &qs, ds.id())?;
            eprintln!("wrote {} queries to {}", qs.m(), out.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum GraphCommand {
    /// Build a proximity graph.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        kind: GraphKindArg,
        /// Threshold parameter M (dense: M > 1; sparse: 0 < M < 1).
        #[arg(long)]
        m: Option<f64>,
        /// Neighbor count for kNN graphs.
        #[arg(long)]
        k: Option<usize>,
        /// Add reverse edges to kNN graphs.
        #[arg(long)]
        symmetrize: bool,
        /// Cap an out-of-range dense threshold at pi/2 instead of failing.
        #[arg(long)]
        cap_angle: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample long-range edges and attach them to a graph.
    AddLong {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Edges per node; defaults to ceil(log2 n).
        #[arg(long)]
        count: Option<usize>,
        /// Pre-sampling exponent phi for kl-rank-presampled.
        #[arg(long)]
        phi: Option<f64>,
        /// Exclude targets within n^(-1/d) (distance scheme only).
        #[arg(long)]
        exclude_near: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Degree and edge statistics.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKindArg {
    Dense,
    Sparse,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    KlDist,
    KlRank,
    KlRankPresampled,
    Uniform,
}

impl From<SchemeArg> for LongEdgeScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::KlDist => LongEdgeScheme::KleinbergDistance,
            SchemeArg::KlRank => LongEdgeScheme::KleinbergRank,
            SchemeArg::KlRankPresampled => LongEdgeScheme::RankPresampled,
            SchemeArg::Uniform => LongEdgeScheme::UniformRandom,
        }
    }
}

fn run_graph(cmd: GraphCommand) -> Result<()> {
    match cmd {
        GraphCommand::Build {
            data,
            kind,
            m,
            k,
            symmetrize,
            cap_angle,
            out,
        } => {
            let ds = load_dataset(&data)?;
            let g: SearchGraph = match kind {
                GraphKindArg::Dense => {
                    build_threshold_dense(&ds, m.context("dense needs --m")?, cap_angle)?
                }
                GraphKindArg::Sparse => build_threshold_sparse(&ds, m.context("sparse needs --m")?)?,
                GraphKindArg::Knn => build_knn(&ds, k.context("knn needs --k")?, symmetrize)?,
            };
            save_graph(&out, &g)?;
            let stats = graph_stats(&g, &ds)?;
            eprintln!(
                "built {} graph: mean degree {:.2} (expected f {:.2}), edges {}",
                g.config().kind_name(),
                stats.mean_degree,
                stats.expected_f,
                stats.edge_count
            );
        }
        GraphCommand::AddLong {
            data,
            graph,
            scheme,
            count,
            phi,
            exclude_near,
            seed,
            out,
        } => {
            let ds = load_dataset(&data)?;
            let g = load_graph(&graph, &ds)?;
            let mut cfg = LongEdgeConfig::new(
                scheme.into(),
                count.unwrap_or_else(|| default_edges_per_node(ds.n())),
                seed,
            );
            if let Some(phi) = phi {
                cfg.presample_exponent = phi;
            }
            cfg.exclude_near = exclude_near;
            let set = sample_long_edges(&ds, &cfg)?;
            let g = attach(g, &set)?;
            save_graph(&out, &g)?;
            let total: usize = set.lists.iter().map(|l| l.len()).sum();
            eprintln!(
                "attached {} long edges ({} per node requested)",
                total, cfg.edges_per_node
            );
        }
        GraphCommand::Stats { data, graph } => {
            let ds = load_dataset(&data)?;
            let g = load_graph(&graph, &ds)?;
            let stats = graph_stats(&g, &ds)?;
            println!("kind: {}", g.config().kind_name());
            println!("nodes: {}", ds.n());
            println!("mean_degree: {:.4}", stats.mean_degree);
            println!("min_degree: {}", stats.min_degree);
            println!("max_degree: {}", stats.max_degree);
            println!("edge_count: {}", stats.edge_count);
            println!("expected_f: {:.4}", stats.expected_f);
            if let Some(tag) = g.long_tag() {
                println!(
                    "long_edges: scheme {} count {} seed {}",
                    tag.scheme, tag.edges_per_node, tag.seed
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum SearchCommand {
    /// Run a query set against a graph.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum, default_value = "greedy")]
        algo: AlgoArg,
        /// Beam width (beam algorithm).
        #[arg(long, default_value_t = 16)]
        beam: usize,
        /// Evaluate long links first, skip locals on improvement.
        #[arg(long)]
        llf: bool,
        /// Start rule: "random" or "fixed:IDX".
        #[arg(long, default_value = "random")]
        start: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dump per-query results as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Greedy,
    Beam,
}

fn parse_start(s: &str) -> Result<StartRule> {
    if s == "random" {
        Ok(StartRule::RandomHemisphere)
    } else if let Some(idx) = s.strip_prefix("fixed:") {
        Ok(StartRule::FixedIndex(idx.parse()?))
    } else {
        bail!("start must be 'random' or 'fixed:IDX'")
    }
}

fn run_search(cmd: SearchCommand) -> Result<()> {
    let SearchCommand::Run {
        data,
        graph,
        queries,
        algo,
        beam,
        llf,
        start,
        seed,
        dump,
    } = cmd;
    let ds = load_dataset(&data)?;
    let g = load_graph(&graph, &ds)?;
    let (qs, _) = load_queries(&queries)?;
    let cfg = SearchConfig {
        algorithm: match algo {
            AlgoArg::Greedy => Algorithm::Greedy,
            AlgoArg::Beam => Algorithm::Beam { width: beam },
        },
        llf,
        start: parse_start(&start)?,
        max_steps: None,
        seed,
    };
    let (agg, results) = evaluate_query_set(&g, &ds, &qs, &cfg);
    print_aggregate(&agg);
    if let Some(path) = dump {
        bench::write_query_results_csv(&path, &qs, &results)?;
        eprintln!("per-query results written to {}", path.display());
    }
    Ok(())
}

fn print_aggregate(agg: &proxgraph::search::QueryAggregate) {
    println!("queries: {}", agg.queries);
    println!("recall_at_1: {:.4}", agg.recall_at_1);
    println!("error: {:.4}", 1.0 - agg.recall_at_1);
    println!("mean_steps: {:.3}", agg.mean_steps);
    println!("mean_distance_computations: {:.2}", agg.mean_distance_computations);
    println!("wall_seconds: {:.3}", agg.wall_seconds);
    println!(
        "queries_per_second: {:.1}",
        agg.queries as f64 / agg.wall_seconds.max(1e-12)
    );
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum PipelineCommand {
    /// Fit a transform, build the low-space dataset and graph.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "random")]
        kind: TransformKindArg,
        #[arg(long)]
        target_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// kNN degree of the low-space graph.
        #[arg(long, default_value_t = 16)]
        graph_k: usize,
        /// Output base path (writes BASE.low.*, BASE.pgxf, BASE.pgrf).
        #[arg(long)]
        out: PathBuf,
    },
    /// Beam-search the low space and re-rank candidates in the original
    /// space.
    Search {
        #[arg(long)]
        data: PathBuf,
        /// Base path from `pipeline build`.
        #[arg(long)]
        pipeline: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 16)]
        beam: usize,
        #[arg(long)]
        llf: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformKindArg {
    Random,
    Pca,
    Identity,
}

impl From<TransformKindArg> for TransformKind {
    fn from(k: TransformKindArg) -> Self {
        match k {
            TransformKindArg::Random => TransformKind::RandomProjection,
            TransformKindArg::Pca => TransformKind::PcaProjection,
            TransformKindArg::Identity => TransformKind::Identity,
        }
    }
}

fn with_suffix(base: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_pipeline(cmd: PipelineCommand) -> Result<()> {
    match cmd {
        PipelineCommand::Build {
            data,
            kind,
            target_dim,
            seed,
            graph_k,
            out,
        } => {
            let ds = load_dataset(&data)?;
            let spec = TransformSpec {
                kind: kind.into(),
                target_dim,
                seed,
            };
            let (low, transform) = fit_transform(&ds, spec)?;
            let g = build_knn(&low, graph_k, false)?;
            save_dataset(&with_suffix(&out, ".low"), &low)?;
            transform.save(with_suffix(&out, ".pgxf"))?;
            save_graph(with_suffix(&out, ".pgrf"), &g)?;
            eprintln!(
                "pipeline: {} -> dim {} ({} graph, k = {graph_k})",
                ds.dim(),
                low.dim(),
                g.config().kind_name()
            );
        }
        PipelineCommand::Search {
            data,
            pipeline,
            queries,
            beam,
            llf,
            seed,
            dump,
        } => {
            let ds = load_dataset(&data)?;
            let low = load_dataset(with_suffix(&pipeline, ".low"))?;
            let transform = Transform::load(with_suffix(&pipeline, ".pgxf"))?;
            let g_low = load_graph(with_suffix(&pipeline, ".pgrf"), &low)?;
            let (qs, _) = load_queries(&queries)?;
            let cfg = SearchConfig::beam(beam, seed).with_llf(llf);
            let t0 = std::time::Instant::now();
            let results = rerank_query_set(&g_low, &low, &ds, &qs, &transform, &cfg)?;
            let wall = t0.elapsed().as_secs_f64();
            let flat: Vec<SearchResult> = results
                .iter()
                .map(|rr| {
                    let mut res = rr.low;
                    res.answer = rr.answer;
                    res.answer_distance = rr.answer_distance;
                    res.success_exact = rr.success_exact;
                    res
                })
                .collect();
            let agg = aggregate(&flat, wall);
            print_aggregate(&agg);
            let orig_dc: u64 = results
                .iter()
                .map(|rr| rr.original_distance_computations as u64)
                .sum();
            println!(
                "mean_original_space_distance_computations: {:.2}",
                orig_dc as f64 / qs.m() as f64
            );
            if let Some(path) = dump {
                bench::write_query_results_csv(&path, &qs, &flat)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum BenchCommand {
    /// Execute a TOML sweep plan.
    Run {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Greedy step count versus n on dense threshold graphs; asserts the
    /// fitted exponent lies in [--min-slope, --max-slope].
    Scaling {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_value = "1000,4000,16000,64000")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long, default_value_t = 500)]
        queries: usize,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.35)]
        min_slope: f64,
        #[arg(long, default_value_t = 0.65)]
        max_slope: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-edge scheme comparison at equal edge budget; asserts the
    /// Kleinberg-rank scheme cuts steps to the given fraction of the plain
    /// graph and beats uniform edges with bootstrap separation.
    LongEdges {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 64000)]
        n: usize,
        #[arg(long, default_value_t = 6.0)]
        m: f64,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 500)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3333333333333333)]
        max_ratio: f64,
    },
    /// Minimal kNN degree reaching a recall target: greedy versus beam.
    Table2 {
        #[arg(long, default_value_t = 100000)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0.99)]
        recall: f64,
        #[arg(long, default_value_t = 100)]
        beam: usize,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Assert the greedy/beam minimal-degree ratio at the last dim is at
        /// least this.
        #[arg(long, default_value_t = 10.0)]
        min_ratio: f64,
    },
    /// Paired distance-computation counts with the llf heuristic off and on.
    Llf {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 64000)]
        n: usize,
        #[arg(long, default_value_t = 6.0)]
        m: f64,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 500)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run_bench(cmd: BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Run { plan } => {
            let plan = bench::ExperimentPlan::from_toml_file(&plan)?;
            let records = bench::run_plan(&plan)?;
            let failed = records.iter().filter(|r| r.status != "ok").count();
            eprintln!("{} cells, {} failed", records.len(), failed);
            if plan.output.is_none() {
                println!("{}", bench::CSV_HEADER);
                for r in &records {
                    println!("{}", r.to_csv_row());
                }
            }
            if failed > 0 {
                bail!("{failed} cells failed");
            }
        }
        BenchCommand::Scaling {
            d,
            n_list,
            m,
            queries,
            radius,
            seed,
            min_slope,
            max_slope,
            out,
        } => {
            let res =
                bench::step_scaling_experiment(d, &n_list, m, queries, radius, None, seed)?;
            let mut csv = String::from("n,mean_steps,recall_at_1,mean_distance_computations\n");
            for p in &res.points {
                println!(
                    "n={:8} mean_steps={:10.3} recall={:.4} dist_comps={:10.1}",
                    p.n, p.mean_steps, p.recall_at_1, p.mean_distance_computations
                );
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    p.n, p.mean_steps, p.recall_at_1, p.mean_distance_computations
                ));
            }
            if let Some(path) = out {
                std::fs::write(path, csv)?;
            }
            let ok = res.slope >= min_slope && res.slope <= max_slope;
            println!(
                "[{}] fitted steps exponent {:.3} (target [{min_slope}, {max_slope}])",
                if ok { "PASS" } else { "FAIL" },
                res.slope
            );
            if !ok {
                bail!("step-scaling exponent outside target range");
            }
        }
        BenchCommand::LongEdges {
            d,
            n,
            m,
            count,
            phi,
            queries,
            seed,
            max_ratio,
        } => {
            let ds = data::generate_uniform(n, d, seed)?;
            let r = (n as f64).powf(-1.0 / d as f64).min(0.99).asin();
            let qs = data::plant_queries(&ds, queries, r, seed ^ 1)?;
            let schemes = [
                LongEdgeScheme::KleinbergRank,
                LongEdgeScheme::KleinbergDistance,
                LongEdgeScheme::RankPresampled,
                LongEdgeScheme::UniformRandom,
            ];
            let count = count.unwrap_or_else(|| default_edges_per_node(n));
            let comps = bench::long_edge_comparison(&ds, m, count, phi, &schemes, &qs, seed)?;
            for c in &comps {
                println!(
                    "{:<22} steps={:8.2} recall={:.4} dist_comps={:8.1}",
                    c.scheme
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| "plain".into()),
                    c.aggregate.mean_steps,
                    c.aggregate.recall_at_1,
                    c.aggregate.mean_distance_computations
                );
            }
            let plain = &comps[0];
            let kl = comps
                .iter()
                .find(|c| c.scheme == Some(LongEdgeScheme::KleinbergRank))
                .expect("kl-rank present");
            let uni = comps
                .iter()
                .find(|c| c.scheme == Some(LongEdgeScheme::UniformRandom))
                .expect("uniform present");
            let ratio = kl.aggregate.mean_steps / plain.aggregate.mean_steps;
            let (lo, hi) = bench::bootstrap_mean_diff(&uni.steps, &kl.steps, seed ^ 2);
            let ok_ratio = ratio <= max_ratio;
            let ok_sep = lo > 0.0;
            println!(
                "[{}] kl-rank/plain step ratio {ratio:.3} (target <= {max_ratio:.3})",
                if ok_ratio { "PASS" } else { "FAIL" }
            );
            println!(
                "[{}] uniform minus kl-rank steps 95% CI ({lo:.2}, {hi:.2}) excludes 0",
                if ok_sep { "PASS" } else { "FAIL" }
            );
            if !(ok_ratio && ok_sep) {
                bail!("long-edge comparison assertions failed");
            }
        }
        BenchCommand::Table2 {
            n,
            dims,
            recall,
            beam,
            queries,
            seed,
            min_ratio,
        } => {
            let ladder = [
                8usize, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024, 1536,
                2048,
            ];
            let rows = bench::table2_analog(n, &dims, &ladder, recall, beam, queries, seed)?;
            println!("d,mode,min_degree,recall_at_1,mean_steps,mean_dist_comps");
            for r in &rows {
                println!(
                    "{},{},{},{:.4},{:.2},{:.1}",
                    r.d,
                    r.mode,
                    r.min_degree
                        .map(|k| k.to_string())
                        .unwrap_or_else(|| "not-reached".into()),
                    r.recall_at_1,
                    r.mean_steps,
                    r.mean_distance_computations
                );
            }
            let last_d = *dims.last().expect("dims nonempty");
            let greedy_deg = rows
                .iter()
                .find(|r| r.d == last_d && r.mode == "greedy")
                .and_then(|r| r.min_degree);
            let beam_deg = rows
                .iter()
                .find(|r| r.d == last_d && r.mode.starts_with("beam"))
                .and_then(|r| r.min_degree);
            match (greedy_deg, beam_deg) {
                (Some(g), Some(b)) => {
                    let ratio = g as f64 / b as f64;
                    let ok = ratio >= min_ratio;
                    println!(
                        "[{}] d={last_d}: greedy degree {g} / beam degree {b} = {ratio:.1} (target >= {min_ratio})",
                        if ok { "PASS" } else { "FAIL" }
                    );
                    if !ok {
                        bail!("degree ratio below target");
                    }
                }
                _ => bail!("recall target not reached within the degree ladder"),
            }
        }
        BenchCommand::Llf {
            d,
            n,
            m,
            count,
            queries,
            seed,
        } => {
            let ds = data::generate_uniform(n, d, seed)?;
            let r = (n as f64).powf(-1.0 / d as f64).min(0.99).asin();
            let qs = data::plant_queries(&ds, queries, r, seed ^ 1)?;
            let g = build_threshold_dense(&ds, m, false)?;
            let lcfg = LongEdgeConfig::new(
                LongEdgeScheme::KleinbergRank,
                count.unwrap_or_else(|| default_edges_per_node(n)),
                seed ^ 2,
            );
            let g = attach(g, &sample_long_edges(&ds, &lcfg)?)?;
            let ab = bench::llf_ablation(&g, &ds, &qs, &SearchConfig::greedy(seed ^ 3));
            println!(
                "llf off: dist_comps={:8.1} recall={:.4}",
                ab.without_llf.mean_distance_computations, ab.without_llf.recall_at_1
            );
            println!(
                "llf on:  dist_comps={:8.1} recall={:.4}",
                ab.with_llf.mean_distance_computations, ab.with_llf.recall_at_1
            );
            let ok_dc = ab.with_llf.mean_distance_computations
                < ab.without_llf.mean_distance_computations;
            let ok_recall =
                (ab.with_llf.recall_at_1 - ab.without_llf.recall_at_1).abs() <= 0.005;
            println!(
                "[{}] llf reduces distance computations, recall within 0.5%",
                if ok_dc && ok_recall { "PASS" } else { "FAIL" }
            );
            if !(ok_dc && ok_recall) {
                bail!("llf ablation assertions failed");
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Caps { command } => match command {
            CapsCommand::Tabulate(cmd) => run_caps(cmd),
        },
        Command::Data { command } => run_data(command),
        Command::Graph { command } => run_graph(command),
        Command::Search { command } => run_search(command),
        Command::Pipeline { command } => run_pipeline(command),
        Command::Bench { command } => run_bench(command),
    }
}
