//! Single synthetic runs (generate, split, train, explain, score) and the
//! resumable benchmark suite built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::downstream::{run_link_task, run_node_task, TaskConfig, TaskReport};
use crate::error::{Error, Result};
use crate::explain::build_explanations;
use crate::graph::{all_pairs_distances, split_edges};
use crate::metrics::{embedding_metrics, EmbeddingMetrics, MetricToggles};
use crate::model::{Activation, EncoderKind};
use crate::sampling::WalkConfig;
use crate::synth::{default_spec, generate_synthetic, SynthKind};
use crate::training::{train, LossBreakdown, LossConfig, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "disene-fc")]
    DiseneFc,
    #[serde(rename = "disene-gcn")]
    DiseneGcn,
    #[serde(rename = "baseline-sgns")]
    BaselineSgns,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DiseneFc, Method::DiseneGcn, Method::BaselineSgns];

    pub fn label(self) -> &'static str {
        match self {
            Method::DiseneFc => "disene-fc",
            Method::DiseneGcn => "disene-gcn",
            Method::BaselineSgns => "baseline-sgns",
        }
    }

    pub fn encoder(self) -> EncoderKind {
        match self {
            Method::DiseneGcn => EncoderKind::Gcn,
            _ => EncoderKind::Fc,
        }
    }

    /// Label of a trained configuration; both weights at zero is the baseline.
    pub fn infer(encoder: EncoderKind, loss: &LossConfig) -> Method {
        match (loss.is_baseline(), encoder) {
            (true, _) => Method::BaselineSgns,
            (false, EncoderKind::Fc) => Method::DiseneFc,
            (false, EncoderKind::Gcn) => Method::DiseneGcn,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: SynthKind,
    pub method: Method,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub seed: u64,
    /// Share of edges held out for link prediction.
    pub test_fraction: f64,
    pub loss: LossConfig,
    pub walk: WalkConfig,
    pub task: TaskConfig,
    pub metrics: MetricToggles,
    pub permutations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: SynthKind::Ring,
            method: Method::DiseneFc,
            hidden_dim: 128,
            out_dim: 32,
            activation: Activation::Relu,
            seed: 0,
            test_fraction: 0.1,
            loss: LossConfig::default(),
            walk: WalkConfig::default(),
            task: TaskConfig::default(),
            metrics: MetricToggles::default(),
            permutations: 100,
        }
    }
}

impl RunConfig {
    /// Propagates the run seed to every stage and applies the method's
    /// loss weights (zero for the baseline).
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.loss.seed = c.seed;
        c.walk.seed = c.seed;
        c.task.seed = c.seed;
        c.task.logreg.seed = c.seed;
        if c.method == Method::BaselineSgns {
            c.loss.lambda_dis = 0.0;
            c.loss.lambda_ent = 0.0;
        }
        c
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            encoder: self.method.encoder(),
            activation: self.activation,
            hidden_dim: self.hidden_dim,
            out_dim: self.out_dim,
        }
    }

    pub fn name(&self) -> String {
        format!("{}_{}_k{}_s{}", self.dataset, self.method, self.out_dim, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim and out_dim must be >= 1".into()));
        }
        if self.metrics.poc && self.permutations == 0 {
            return Err(Error::InvalidConfig("permutations must be >= 1".into()));
        }
        self.loss.validate()?;
        self.walk.validate()
    }
}

/// Hex SHA-256 of the canonical JSON form.
pub fn config_hash<S: Serialize>(config: &S) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: SynthKind,
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub final_loss: LossBreakdown,
    pub metrics: EmbeddingMetrics,
    pub link: TaskReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<TaskReport>,
}

/// Generates the dataset, holds out test edges, trains on the remaining
/// graph, and scores explanations (on training edges) and downstream tasks.
pub fn run_single(config: &RunConfig) -> Result<RunReport> {
    let cfg = config.resolved();
    cfg.validate()?;
    let hash = config_hash(&cfg)?;
    let (g, gts) = generate_synthetic(&default_spec(cfg.dataset).with_seed(cfg.seed))?;
    let split = split_edges(&g, cfg.test_fraction, cfg.seed)?;
    let train_graph = g.subgraph_with_edges(&split.train_edges)?;

    let outcome = train::<f32>(&train_graph, &cfg.model_config(), &cfg.loss, &cfg.walk)?;
    let h = &outcome.embedding;

    let expl = build_explanations(h, train_graph.edges())?;
    let train_gts = gts.restrict_to(&train_graph);
    let dist = cfg.metrics.poc.then(|| all_pairs_distances(&train_graph));
    let metrics = embedding_metrics(
        h,
        &expl,
        &train_gts,
        train_graph.num_edges(),
        dist.as_ref(),
        &cfg.metrics,
        cfg.permutations,
        cfg.seed,
    )?;

    let link = run_link_task(h, &g, &split, &gts, &cfg.task)?;
    let node = if cfg.dataset.has_background() {
        Some(run_node_task(h, &gts, &cfg.task)?)
    } else {
        None
    };
    let final_loss = outcome
        .trace
        .last()
        .cloned()
        .ok_or_else(|| Error::Degenerate("empty loss trace".into()))?;
    Ok(RunReport {
        dataset: cfg.dataset,
        method: cfg.method,
        k: cfg.out_dim,
        seed: cfg.seed,
        config_hash: hash,
        config: cfg,
        final_loss,
        metrics,
        link,
        node,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSuite {
    pub datasets: Vec<SynthKind>,
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Template for every run; dataset, method, out_dim and seed are overwritten.
    pub base: RunConfig,
}

impl Default for BenchSuite {
    fn default() -> Self {
        BenchSuite {
            datasets: SynthKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            dims: vec![2, 4, 8, 16, 32, 64, 128],
            seeds: (0..5).collect(),
            base: RunConfig::default(),
        }
    }
}

impl BenchSuite {
    pub fn manifest(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &dataset in &self.datasets {
            for &method in &self.methods {
                for &out_dim in &self.dims {
                    for &seed in &self.seeds {
                        out.push(
                            RunConfig {
                                dataset,
                                method,
                                out_dim,
                                seed,
                                ..self.base.clone()
                            }
                            .resolved(),
                        );
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct BenchOutcome {
    pub reports: Vec<RunReport>,
    /// Runs loaded from an earlier invocation.
    pub reused: usize,
    pub failures: Vec<(String, String)>,
}

fn load_existing(path: &Path, hash: &str) -> Option<RunReport> {
    let text = std::fs::read_to_string(path).ok()?;
    let report: RunReport = serde_json::from_str(&text).ok()?;
    (report.config_hash == hash).then_some(report)
}

/// Runs every manifest entry on the current rayon pool, one JSON file per
/// run under `out/runs`. Runs whose file already holds a report with the
/// same config hash are loaded instead of recomputed.
pub fn run_bench(suite: &BenchSuite, out: &Path) -> Result<BenchOutcome> {
    let runs_dir = out.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| Error::Read {
        path: runs_dir.clone(),
        source: e,
    })?;
    let manifest = suite.manifest();
    let results: Vec<(String, std::result::Result<(RunReport, bool), String>)> = manifest
        .par_iter()
        .map(|cfg| {
            let name = cfg.name();
            let path = runs_dir.join(format!("{name}.json"));
            let res = (|| -> Result<(RunReport, bool)> {
                let hash = config_hash(cfg)?;
                if let Some(r) = load_existing(&path, &hash) {
                    return Ok((r, true));
                }
                let report = run_single(cfg)?;
                write_atomic(&path, &serde_json::to_vec_pretty(&report)?)?;
                log::info!("finished {name}");
                Ok((report, false))
            })();
            (name, res.map_err(|e| e.to_string()))
        })
        .collect();
    let mut outcome = BenchOutcome::default();
    for (name, res) in results {
        match res {
            Ok((r, reused)) => {
                outcome.reused += reused as usize;
                outcome.reports.push(r);
            }
            Err(e) => {
                log::error!("{name}: {e}");
                outcome.failures.push((name, e));
            }
        }
    }
    Ok(outcome)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Scalar metrics of one run, keyed by name; undefined values are absent.
pub fn scalar_metrics(r: &RunReport) -> BTreeMap<&'static str, f64> {
    let mut m = BTreeMap::new();
    let mut put = |k: &'static str, v: Option<f64>| {
        if let Some(v) = v {
            m.insert(k, v);
        }
    };
    put("link_plausibility", r.link.plausibility);
    put("link_auc_pr", Some(r.link.auc_pr));
    if let Some(n) = &r.node {
        put("node_plausibility", n.plausibility);
        put("node_auc_pr", Some(n.auc_pr));
    }
    put("comprehensibility", r.metrics.comprehensibility_mean);
    put("sparsity", r.metrics.sparsity_score);
    put("ovc", r.metrics.ovc.as_ref().and_then(|v| v.value));
    put("poc", r.metrics.poc.as_ref().and_then(|v| v.value));
    put("empty_dims", Some(r.metrics.empty_dims as f64));
    m
}

/// Long-format table: one row per run and metric.
pub fn write_long_csv(reports: &[RunReport], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "dataset,method,k,seed,metric,value,config_hash")?;
    for r in reports {
        for (metric, value) in scalar_metrics(r) {
            writeln!(w, "{},{},{},{},{},{},{}", r.dataset, r.method, r.k, r.seed, metric, value, r.config_hash)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: SynthKind,
    pub method: Method,
    pub k: usize,
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub n: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and spread over seeds for every (dataset, method, K, metric).
pub fn aggregate(reports: &[RunReport]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(SynthKind, Method, usize, &'static str), Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (metric, v) in scalar_metrics(r) {
            groups.entry((r.dataset, r.method, r.k, metric)).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .map(|((dataset, method, k, metric), vals)| {
            let (mean, std) = mean_std(&vals);
            Aggregate {
                dataset,
                method,
                k,
                metric: metric.to_string(),
                mean,
                std,
                n: vals.len(),
            }
        })
        .collect()
}

/// For each (dataset, method), the K with the highest seed-mean of `metric`.
pub fn best_over_k(aggs: &[Aggregate], metric: &str) -> Vec<Aggregate> {
    let mut best: BTreeMap<(SynthKind, Method), Aggregate> = BTreeMap::new();
    for a in aggs.iter().filter(|a| a.metric == metric && a.mean.is_finite()) {
        let slot = best.entry((a.dataset, a.method)).or_insert_with(|| a.clone());
        if a.mean > slot.mean {
            *slot = a.clone();
        }
    }
    best.into_values().collect()
}

/// Plausibility table: one row per method, one column per (task, dataset).
pub fn write_plausibility_table(aggs: &[Aggregate], path: &Path) -> Result<()> {
    let link = best_over_k(aggs, "link_plausibility");
    let node = best_over_k(aggs, "node_plausibility");
    let mut methods: Vec<Method> = link.iter().chain(&node).map(|a| a.method).collect();
    methods.sort();
    methods.dedup();
    let cols: Vec<(&str, SynthKind, &[Aggregate])> = SynthKind::ALL
        .iter()
        .map(|&d| ("link", d, link.as_slice()))
        .chain(
            SynthKind::ALL
                .iter()
                .filter(|d| d.has_background())
                .map(|&d| ("node", d, node.as_slice())),
        )
        .collect();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = cols.iter().map(|(t, d, _)| format!("{t}:{d}")).collect();
    writeln!(w, "method,{}", header.join(","))?;
    for m in methods {
        let cells: Vec<String> = cols
            .iter()
            .map(|(_, d, rows)| {
                rows.iter()
                    .find(|a| a.method == m && a.dataset == *d)
                    .map(|a| format!("{:.3}±{:.3} (K={})", a.mean, a.std, a.k))
                    .unwrap_or_default()
            })
            .collect();
        writeln!(w, "{},{}", m, cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-K mean±std table of one metric: rows (dataset, method), columns K.
pub fn write_metric_table(aggs: &[Aggregate], metric: &str, path: &Path) -> Result<()> {
    let mut dims: Vec<usize> = aggs.iter().filter(|a| a.metric == metric).map(|a| a.k).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut rows: BTreeMap<(SynthKind, Method), BTreeMap<usize, &Aggregate>> = BTreeMap::new();
    for a in aggs.iter().filter(|a| a.metric == metric) {
        rows.entry((a.dataset, a.method)).or_default().insert(a.k, a);
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = dims.iter().map(|k| format!("K={k}")).collect();
    writeln!(w, "dataset,method,{}", header.join(","))?;
    for ((d, m), by_k) in rows {
        let cells: Vec<String> = dims
            .iter()
            .map(|k| by_k.get(k).map(|a| format!("{:.3}±{:.3}", a.mean, a.std)).unwrap_or_default())
            .collect();
        writeln!(w, "{d},{m},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Long CSV, aggregate JSON, the plausibility table and per-metric tables.
pub fn write_bench_tables(reports: &[RunReport], out: &Path) -> Result<()> {
    write_long_csv(reports, &out.join("results.csv"))?;
    let aggs = aggregate(reports);
    std::fs::write(out.join("summary.json"), serde_json::to_vec_pretty(&aggs)?)?;
    write_plausibility_table(&aggs, &out.join("plausibility.csv"))?;
    for metric in ["comprehensibility", "sparsity", "ovc", "poc", "link_auc_pr"] {
        write_metric_table(&aggs, metric, &out.join(format!("{metric}.csv")))?;
    }
    Ok(())
}
