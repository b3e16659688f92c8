mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use disene::downstream::{run_link_task, run_node_task, TaskConfig};
use disene::experiment::{mean_std, run_bench, write_bench_tables, BenchSuite, Method, RunConfig};
use disene::explain::build_explanations;
use disene::graph::{
    all_pairs_distances, communities_from_labels, load_edge_list, load_labels, split_edges, write_labels, Graph,
    GroundTruth,
};
use disene::metrics::{embedding_metrics, EmbeddingMetrics, MetricToggles};
use disene::model::{
    read_embedding_binary, read_embedding_text, write_embedding_binary, write_embedding_text, Activation, EncoderKind,
};
use disene::sampling::NegativeDistribution;
use disene::synth::{default_spec, generate_synthetic, SynthKind};
use disene::training::train;
use disene::Matrix32;
use serde_json::json;

#[derive(Parser)]
#[command(name = "disene", version, about = "Dimension-wise explainable node embeddings")]
struct Cli {
    /// Seed for data generation, splits, initialisation and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// TOML configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded execution.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic graph with planted cliques.
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: SynthKind,
    },
    /// Train an encoder and write the embedding checkpoint.
    Train(TrainArgs),
    /// Extract per-dimension edge explanations from an embedding.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embedding: PathBuf,
    },
    /// Interpretability metrics for one or more embeddings (e.g. one per seed).
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        truth: TruthArgs,
        #[arg(long, required = true, num_args = 1..)]
        embedding: Vec<PathBuf>,
        /// Expected embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        no_comprehensibility: bool,
        #[arg(long)]
        no_sparsity: bool,
        #[arg(long)]
        no_ovc: bool,
        #[arg(long)]
        no_poc: bool,
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Logistic-regression task, AUC-PR and plausibility.
    Downstream {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        truth: TruthArgs,
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Held-out node share for node classification.
        #[arg(long)]
        node_test_fraction: Option<f64>,
    },
    /// Run the synthetic benchmark suite (resumable).
    Bench {
        /// Comma-separated subset of ring,sbm,ba,er.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        datasets: Option<Vec<SynthKind>>,
        /// Comma-separated subset of disene-fc,disene-gcn,baseline-sgns.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Option<Vec<Method>>,
        /// Comma-separated embedding sizes (default 2,4,...,128).
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Number of seeds, starting at --seed (default 0).
        #[arg(long)]
        seeds: Option<u64>,
        /// Training epochs per run.
        #[arg(long)]
        epochs: Option<usize>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Whitespace-separated edge list; the largest component is kept.
    #[arg(long)]
    edges: PathBuf,
    /// Hold out this edge share and use only the remaining edges (same
    /// split for a given seed across commands).
    #[arg(long)]
    holdout: Option<f64>,
}

#[derive(Args)]
struct TruthArgs {
    /// Ground-truth JSON as written by `gen`.
    #[arg(long, conflicts_with = "labels")]
    ground_truth: Option<PathBuf>,
    /// `node label` lines; negative labels mark background nodes.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Edge list to train on.
    #[arg(long, conflicts_with = "kind")]
    edges: Option<PathBuf>,
    /// Train on a freshly generated synthetic graph instead.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<SynthKind>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, value_enum)]
    encoder: Option<EncoderArg>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Output dimension K.
    #[arg(long)]
    dim: Option<usize>,
    /// Hidden dimension D.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lambda_dis: Option<f64>,
    #[arg(long)]
    lambda_ent: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    num_walks: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long, value_enum)]
    negative_distribution: Option<NegArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncoderArg {
    Fc,
    Gcn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Softplus,
}

#[derive(Clone, Copy, ValueEnum)]
enum NegArg {
    Uniform,
    Degree,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TaskArg {
    Link,
    Node,
}

fn parse_kind(s: &str) -> std::result::Result<SynthKind, String> {
    s.parse().map_err(|e: disene::Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: disene::Error| e.to_string())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    let file = config::load(cli.config.as_deref())?;
    let mut run_cfg = file.run.clone();
    if let Some(s) = cli.seed {
        run_cfg.seed = s;
    }
    let run_cfg = run_cfg.resolved();
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match cli.cmd {
        Cmd::Gen { kind } => cmd_gen(kind, run_cfg.seed, out),
        Cmd::Train(args) => cmd_train(args, run_cfg, out),
        Cmd::Explain { data, embedding } => cmd_explain(&data, &embedding, run_cfg.seed, out),
        Cmd::Evaluate {
            data,
            truth,
            embedding,
            dim,
            no_comprehensibility,
            no_sparsity,
            no_ovc,
            no_poc,
            permutations,
        } => {
            let expected = dim.or(file.explicit_dim.then_some(run_cfg.out_dim));
            let toggles = MetricToggles {
                comprehensibility: run_cfg.metrics.comprehensibility && !no_comprehensibility,
                sparsity: run_cfg.metrics.sparsity && !no_sparsity,
                ovc: run_cfg.metrics.ovc && !no_ovc,
                poc: run_cfg.metrics.poc && !no_poc,
            };
            let perms = permutations.unwrap_or(run_cfg.permutations);
            cmd_evaluate(&data, &truth, &embedding, expected, toggles, perms, run_cfg.seed, out)
        }
        Cmd::Downstream {
            data,
            truth,
            embedding,
            task,
            node_test_fraction,
        } => {
            let mut tc = run_cfg.task;
            if let Some(f) = node_test_fraction {
                tc.node_test_fraction = f;
            }
            cmd_downstream(&data, &truth, &embedding, task, tc, run_cfg.seed, out)
        }
        Cmd::Bench {
            datasets,
            methods,
            dims,
            seeds,
            epochs,
        } => {
            let grid = file.bench;
            let mut base: RunConfig = run_cfg;
            if let Some(e) = epochs {
                base.loss.epochs = e;
            }
            let suite = BenchSuite {
                datasets: datasets.unwrap_or(grid.datasets),
                methods: methods.unwrap_or(grid.methods),
                dims: dims.unwrap_or(grid.dims),
                seeds: match seeds {
                    Some(n) => (0..n).map(|i| cli.seed.unwrap_or(0) + i).collect(),
                    None => grid.seeds,
                },
                base,
            };
            cmd_bench(&suite, out)
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(kind: SynthKind, seed: u64, out: &Path) -> Result<()> {
    let (g, gts) = generate_synthetic(&default_spec(kind).with_seed(seed))?;
    g.write_edge_list(&out.join("edges.txt"))?;
    let labels = gts.labels.clone().unwrap_or_else(|| vec![-1; g.num_nodes()]);
    write_labels(&out.join("labels.txt"), &g, &labels)?;
    write_json(&out.join("ground_truth.json"), &gts.to_json(&g))?;
    log::info!("{kind}: {} nodes, {} edges, {} communities", g.num_nodes(), g.num_edges(), gts.communities.len());
    Ok(())
}

/// The graph named by `data`, and the graph restricted to its training
/// edges when a holdout share is given.
fn load_data(data: &DataArgs, seed: u64) -> Result<(Graph, Graph)> {
    let g = load_edge_list(&data.edges).with_context(|| format!("loading {}", data.edges.display()))?;
    let train = match data.holdout {
        Some(f) => {
            let split = split_edges(&g, f, seed)?;
            g.subgraph_with_edges(&split.train_edges)?
        }
        None => g.clone(),
    };
    Ok((g, train))
}

fn load_truth(truth: &TruthArgs, g: &Graph) -> Result<GroundTruth> {
    match (&truth.ground_truth, &truth.labels) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(GroundTruth::from_json(&serde_json::from_str(&text)?, g)?)
        }
        (None, Some(p)) => {
            let labels = load_labels(p, g)?;
            let mut gts = communities_from_labels(g, &labels)?;
            gts.labels = Some(labels.iter().map(|l| l.unwrap_or(-1)).collect());
            Ok(gts)
        }
        (None, None) => bail!("either --ground-truth or --labels is required"),
    }
}

fn load_embedding(path: &Path) -> Result<Matrix32> {
    let h = if path.extension().is_some_and(|e| e == "bin") {
        read_embedding_binary(path)
    } else {
        read_embedding_text(path)
    };
    h.with_context(|| format!("loading embedding {}", path.display()))
}

fn cmd_train(args: TrainArgs, mut cfg: RunConfig, out: &Path) -> Result<()> {
    let g = match (&args.edges, args.kind) {
        (Some(p), _) => load_edge_list(p).with_context(|| format!("loading {}", p.display()))?,
        (None, Some(kind)) => generate_synthetic(&default_spec(kind).with_seed(cfg.seed))?.0,
        (None, None) => bail!("either --edges or --kind is required"),
    };
    let g = match args.holdout {
        Some(f) => g.subgraph_with_edges(&split_edges(&g, f, cfg.seed)?.train_edges)?,
        None => g,
    };
    let mut model = cfg.model_config();
    if let Some(e) = args.encoder {
        model.encoder = match e {
            EncoderArg::Fc => EncoderKind::Fc,
            EncoderArg::Gcn => EncoderKind::Gcn,
        };
    }
    if let Some(a) = args.activation {
        model.activation = match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Softplus => Activation::Softplus,
        };
    }
    if let Some(k) = args.dim {
        model.out_dim = k;
    }
    if let Some(d) = args.hidden {
        model.hidden_dim = d;
    }
    let loss = &mut cfg.loss;
    if let Some(v) = args.lambda_dis {
        loss.lambda_dis = v;
    }
    if let Some(v) = args.lambda_ent {
        loss.lambda_ent = v;
    }
    if let Some(v) = args.epochs {
        loss.epochs = v;
    }
    if let Some(v) = args.lr {
        loss.learning_rate = v;
    }
    if args.batch_size.is_some() {
        loss.batch_size = args.batch_size;
    }
    let walk = &mut cfg.walk;
    if let Some(v) = args.walk_length {
        walk.walk_length = v;
    }
    if let Some(v) = args.num_walks {
        walk.num_walks = v;
    }
    if let Some(v) = args.window {
        walk.window = v;
    }
    if let Some(v) = args.negatives {
        walk.negatives_per_positive = v;
    }
    if let Some(d) = args.negative_distribution {
        walk.negative_distribution = match d {
            NegArg::Uniform => NegativeDistribution::Uniform,
            NegArg::Degree => NegativeDistribution::Degree,
        };
    }

    let label = Method::infer(model.encoder, &cfg.loss);
    let outcome = train::<f32>(&g, &model, &cfg.loss, &cfg.walk)?;
    write_embedding_text(&outcome.embedding, &out.join("embedding.txt"))?;
    write_embedding_binary(&outcome.embedding, &out.join("embedding.bin"))?;
    let final_loss = outcome.trace.last().cloned();
    write_json(
        &out.join("train.json"),
        &json!({
            "label": label.label(),
            "seed": cfg.seed,
            "num_nodes": g.num_nodes(),
            "num_edges": g.num_edges(),
            "holdout": args.holdout,
            "config": { "model": model, "loss": cfg.loss, "walk": cfg.walk },
            "final_loss": final_loss,
            "trace": outcome.trace,
        }),
    )?;
    if let Some(l) = final_loss {
        log::info!("{label}: final loss {:.4} (rw {:.4}, dis {:.4}, ent {:.4})", l.total, l.rw, l.dis, l.ent);
    }
    Ok(())
}

fn check_rows(h: &Matrix32, g: &Graph, path: &Path) -> Result<()> {
    ensure!(
        h.rows() == g.num_nodes(),
        "{} has {} rows but the graph has {} nodes",
        path.display(),
        h.rows(),
        g.num_nodes()
    );
    Ok(())
}

fn cmd_explain(data: &DataArgs, embedding: &Path, seed: u64, out: &Path) -> Result<()> {
    let (_, train) = load_data(data, seed)?;
    let h = load_embedding(embedding)?;
    check_rows(&h, &train, embedding)?;
    let expl = build_explanations(&h, train.edges())?;
    write_json(&out.join("explanation.json"), &expl.to_json(&train))?;
    expl.write_triplets(&train, &out.join("explanation_triplets.csv"))?;
    log::info!("{} dimensions, {} empty", expl.dims(), expl.empty_dims().len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    data: &DataArgs,
    truth: &TruthArgs,
    embeddings: &[PathBuf],
    expected_dim: Option<usize>,
    toggles: MetricToggles,
    permutations: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (_, train) = load_data(data, seed)?;
    let gts = load_truth(truth, &train)?;
    let dist = toggles.poc.then(|| all_pairs_distances(&train));
    let mut runs = Vec::new();
    for path in embeddings {
        let h = load_embedding(path)?;
        check_rows(&h, &train, path)?;
        if let Some(k) = expected_dim {
            ensure!(h.cols() == k, "{} has K = {} but K = {k} was requested", path.display(), h.cols());
        }
        let expl = build_explanations(&h, train.edges())?;
        let m = embedding_metrics(&h, &expl, &gts, train.num_edges(), dist.as_ref(), &toggles, permutations, seed)?;
        runs.push((path.display().to_string(), h.cols(), m));
    }
    let summary = summarize_metrics(runs.iter().map(|r| &r.2));
    let mut csv = String::from("metric,mean,std,n\n");
    for (metric, (mean, std, n)) in &summary {
        csv.push_str(&format!("{metric},{mean},{std},{n}\n"));
    }
    fs::write(out.join("metrics.csv"), csv)?;
    let summary_json: BTreeMap<_, _> = summary
        .iter()
        .map(|(k, (m, s, n))| (k.clone(), json!({ "mean": m, "std": s, "n": n })))
        .collect();
    let runs_json: Vec<_> = runs
        .iter()
        .map(|(p, k, m)| json!({ "embedding": p, "k": k, "seed": seed, "metrics": m }))
        .collect();
    write_json(&out.join("metrics.json"), &json!({ "summary": summary_json, "runs": runs_json }))
}

fn summarize_metrics<'a>(runs: impl Iterator<Item = &'a EmbeddingMetrics>) -> BTreeMap<String, (f64, f64, usize)> {
    let mut vals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in runs {
        let mut put = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                vals.entry(k.to_string()).or_default().push(v);
            }
        };
        put("comprehensibility", m.comprehensibility_mean);
        put("sparsity", m.sparsity_score);
        put("ovc", m.ovc.as_ref().and_then(|v| v.value));
        put("poc", m.poc.as_ref().and_then(|v| v.value));
        put("empty_dims", Some(m.empty_dims as f64));
    }
    vals.into_iter()
        .map(|(k, v)| {
            let (mean, std) = mean_std(&v);
            (k, (mean, std, v.len()))
        })
        .collect()
}

fn cmd_downstream(
    data: &DataArgs,
    truth: &TruthArgs,
    embedding: &Path,
    task: TaskArg,
    cfg: TaskConfig,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let g = load_edge_list(&data.edges).with_context(|| format!("loading {}", data.edges.display()))?;
    let gts = load_truth(truth, &g)?;
    let h = load_embedding(embedding)?;
    check_rows(&h, &g, embedding)?;
    let report = match task {
        TaskArg::Link => {
            let split = split_edges(&g, data.holdout.unwrap_or(0.1), seed)?;
            run_link_task(&h, &g, &split, &gts, &cfg)?
        }
        TaskArg::Node => run_node_task(&h, &gts, &cfg)?,
    };
    let name = report.task.name();
    report.write_instances_csv(&out.join(format!("{name}_instances.csv")))?;
    write_json(&out.join(format!("{name}.json")), &report)?;
    log::info!(
        "{name}: AUC-PR {:.4}, plausibility {:?} over {} instances ({} skipped)",
        report.auc_pr,
        report.plausibility,
        report.evaluated,
        report.skipped
    );
    Ok(())
}

fn cmd_bench(suite: &BenchSuite, out: &Path) -> Result<()> {
    let total = suite.manifest().len();
    log::info!("benchmark: {total} runs");
    let outcome = run_bench(suite, out)?;
    write_bench_tables(&outcome.reports, out)?;
    log::info!(
        "{} runs done ({} reused), {} failed",
        outcome.reports.len(),
        outcome.reused,
        outcome.failures.len()
    );
    if !outcome.failures.is_empty() {
        for (name, e) in &outcome.failures {
            eprintln!("{name}: {e}");
        }
        bail!("{} of {total} runs failed", outcome.failures.len());
    }
    Ok(())
}
