//! Logistic-regression downstream tasks and the plausibility of their
//! LinearSHAP attributions against ground-truth communities.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_non_edges, Edge, EdgeSplit, Graph, GroundTruth, NodeId};
use crate::mask::Mask;
use crate::matrix::Matrix;
use crate::metrics::{auc_pr, f1_score};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogRegConfig {
    pub l2: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            iters: 1000,
            seed: 0,
        }
    }
}

/// Binary logistic regression on raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Training-feature means, the LinearSHAP reference point.
    pub background: Vec<f64>,
}

impl LogRegModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        crate::scalar::sigmoid(self.logit(x))
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Fits by accelerated full-batch gradient descent on standardised features
/// (L2 on the standardised slopes, intercept unpenalised), then maps the
/// coefficients back to the raw scale.
pub fn fit_logreg(features: &[Vec<f64>], labels: &[bool], cfg: &LogRegConfig) -> Result<LogRegModel> {
    let n = features.len();
    if n != labels.len() {
        return Err(Error::Shape(format!("{n} feature rows for {} labels", labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == n {
        return Err(Error::Degenerate("logistic regression needs both classes".into()));
    }
    let k = features[0].len();
    if features.iter().any(|r| r.len() != k) {
        return Err(Error::Shape("ragged feature rows".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic regression features".into()));
    }
    if cfg.l2 < 0.0 {
        return Err(Error::InvalidConfig(format!("l2 must be >= 0, got {}", cfg.l2)));
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..k).map(|j| features.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let var = features.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / nf;
            if var > 1e-24 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|r| (0..k).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();

    // Lipschitz bound of the mean log-loss gradient: 0.25·λ_max([1 X]ᵀ[1 X]/n)
    let lmax = top_eigenvalue(&x, cfg.seed);
    let step = 1.0 / (0.25 * (1.0 + lmax) + cfg.l2);

    // w[0] is the intercept
    let grad = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; k + 1];
        for (row, &t) in x.iter().zip(&y) {
            let z = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
            let r = crate::scalar::sigmoid(z) - t;
            g[0] += r;
            for (gj, a) in g[1..].iter_mut().zip(row) {
                *gj += r * a;
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= nf;
            if j > 0 {
                *gj += cfg.l2 * w[j];
            }
        }
        g
    };
    let objective = |w: &[f64]| -> f64 {
        let mut f = 0.0;
        for (row, &t) in x.iter().zip(&y) {
            let z = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
            f += log1p_exp(z) - t * z;
        }
        f / nf + 0.5 * cfg.l2 * w[1..].iter().map(|v| v * v).sum::<f64>()
    };

    let mut w = vec![0.0; k + 1];
    w[0] = (pos as f64 / (n - pos) as f64).ln();
    let mut prev = w.clone();
    let mut momentum = 1.0f64;
    let mut f_prev = objective(&w);
    for _ in 0..cfg.iters {
        let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_m;
        let look: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
        let g = grad(&look);
        let cand: Vec<f64> = look.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let f = objective(&cand);
        prev = std::mem::replace(&mut w, cand);
        if f > f_prev {
            // restart the momentum when the objective goes up
            momentum = 1.0;
        } else {
            momentum = next_m;
        }
        f_prev = f;
    }

    let coefficients: Vec<f64> = (0..k).map(|j| w[j + 1] / scale[j]).collect();
    let intercept = w[0] - (0..k).map(|j| coefficients[j] * mean[j]).sum::<f64>();
    if !intercept.is_finite() || coefficients.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("logistic regression diverged".into()));
    }
    Ok(LogRegModel {
        coefficients,
        intercept,
        background: mean,
    })
}

// power iteration on XᵀX/n for centred X
fn top_eigenvalue(x: &[Vec<f64>], seed: u64) -> f64 {
    let k = x.first().map_or(0, Vec::len);
    if k == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..k).map(|_| rand::Rng::gen_range(&mut rng, 0.5..1.5)).collect();
    let mut lambda = 0.0;
    for _ in 0..100 {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        let mut next = vec![0.0; k];
        for row in x {
            let p: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (n, a) in next.iter_mut().zip(row) {
                *n += p * a;
            }
        }
        next.iter_mut().for_each(|a| *a /= x.len() as f64);
        lambda = next.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = next;
    }
    // slack for an unconverged estimate
    1.05 * lambda
}

/// `h(u) ⊙ h(v)`
pub fn edge_features<T: Scalar>(h: &Matrix<T>, u: NodeId, v: NodeId) -> Vec<f64> {
    h.row(u).iter().zip(h.row(v)).map(|(a, b)| a.f64() * b.f64()).collect()
}

pub fn node_features<T: Scalar>(h: &Matrix<T>, u: NodeId) -> Vec<f64> {
    h.row(u).iter().map(|a| a.f64()).collect()
}

/// `Ψ_j = β_j (x_j − μ_j)`
pub fn linear_shap(model: &LogRegModel, x: &[f64]) -> Vec<f64> {
    model
        .coefficients
        .iter()
        .zip(x)
        .zip(&model.background)
        .map(|((b, xj), m)| b * (xj - m))
        .collect()
}

/// Per-feature masks `max(0, Ψ_j)` over a set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMasks<K> {
    pub masks: Vec<Mask<K>>,
}

pub fn build_task_masks<K: Ord + Copy>(attributions: &[Vec<f64>], keys: &[K]) -> TaskMasks<K> {
    let k = attributions.first().map_or(0, Vec::len);
    let masks = (0..k)
        .map(|j| Mask::from_weights(keys.iter().zip(attributions).map(|(key, psi)| (*key, psi[j]))))
        .collect();
    TaskMasks { masks }
}

/// Importance-weighted mean of per-feature F1 scores; `None` when no
/// feature has positive importance.
pub fn plausibility_from_scores(psi: &[f64], f1: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, q) in psi.iter().zip(f1) {
        let w = p.max(0.0);
        num += w * q;
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

pub fn plausibility<K: Ord + Copy + Hash>(psi: &[f64], masks: &TaskMasks<K>, community: &HashSet<K>) -> Option<f64> {
    let f1: Vec<f64> = masks.masks.iter().map(|m| f1_score(m, community)).collect();
    plausibility_from_scores(psi, &f1)
}

/// `table[j][c]` = F1 of feature mask `j` against community `c`.
pub fn f1_table<K: Ord + Copy + Hash>(masks: &TaskMasks<K>, communities: &[Vec<K>]) -> Vec<Vec<f64>> {
    let mut member: HashMap<K, Vec<usize>> = HashMap::new();
    for (c, items) in communities.iter().enumerate() {
        for &k in items {
            member.entry(k).or_default().push(c);
        }
    }
    let sizes: Vec<usize> = communities.iter().map(|c| c.iter().collect::<HashSet<_>>().len()).collect();
    masks
        .masks
        .iter()
        .map(|m| {
            let total = m.total();
            let mut inside = vec![0.0; communities.len()];
            let mut hits = vec![0usize; communities.len()];
            for (key, w) in m.entries() {
                for &c in member.get(key).map(Vec::as_slice).unwrap_or(&[]) {
                    inside[c] += w;
                    hits[c] += 1;
                }
            }
            (0..communities.len())
                .map(|c| {
                    if total <= 0.0 || sizes[c] == 0 {
                        return 0.0;
                    }
                    let p = inside[c] / total;
                    let r = hits[c] as f64 / sizes[c] as f64;
                    if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    LinkPrediction,
    NodeClassification,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::LinkPrediction => "link_prediction",
            Task::NodeClassification => "node_classification",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub logreg: LogRegConfig,
    /// Held-out node share for node classification.
    pub node_test_fraction: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            logreg: LogRegConfig::default(),
            node_test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance: String,
    pub g_index: usize,
    pub plausibility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub auc_pr: f64,
    pub plausibility: Option<f64>,
    pub evaluated: usize,
    /// Qualifying instances without any positive attribution.
    pub skipped: usize,
    #[serde(skip)]
    pub instances: Vec<InstanceScore>,
}

impl TaskReport {
    pub fn write_instances_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "instance,g_index,plausibility")?;
        for s in &self.instances {
            match s.plausibility {
                Some(p) => writeln!(w, "{},{},{}", s.instance, s.g_index, p)?,
                None => writeln!(w, "{},{},", s.instance, s.g_index)?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn summarize(task: Task, auc: f64, instances: Vec<InstanceScore>) -> Result<TaskReport> {
    if instances.is_empty() {
        return Err(Error::Degenerate(format!("{}: no qualifying test instances", task.name())));
    }
    let vals: Vec<f64> = instances.iter().filter_map(|s| s.plausibility).collect();
    Ok(TaskReport {
        task,
        auc_pr: auc,
        plausibility: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
        evaluated: vals.len(),
        skipped: instances.len() - vals.len(),
        instances,
    })
}

/// Link prediction on a split of `g`. The classifier sees training edges and
/// as many sampled non-edges; task masks cover every edge of `g`, and
/// plausibility is averaged over test edges lying inside a community.
pub fn run_link_task<T: Scalar>(
    h: &Matrix<T>,
    g: &Graph,
    split: &EdgeSplit,
    gts: &GroundTruth,
    cfg: &TaskConfig,
) -> Result<TaskReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let exclude: HashSet<Edge> = split.test_negatives.iter().copied().collect();
    let negatives = sample_non_edges(g, split.train_edges.len(), &exclude, &mut rng)?;
    let mut x = Vec::with_capacity(2 * negatives.len());
    let mut y = Vec::with_capacity(2 * negatives.len());
    for (edges, label) in [(&split.train_edges, true), (&negatives, false)] {
        for e in edges {
            x.push(edge_features(h, e.u, e.v));
            y.push(label);
        }
    }
    let model = fit_logreg(&x, &y, &cfg.logreg)?;

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (edges, label) in [(&split.test_edges, true), (&split.test_negatives, false)] {
        for e in edges {
            scores.push(model.logit(&edge_features(h, e.u, e.v)));
            labels.push(label);
        }
    }
    let auc = auc_pr(&scores, &labels)?;

    let universe = g.edges();
    let psi: Vec<Vec<f64>> = universe.iter().map(|e| linear_shap(&model, &edge_features(h, e.u, e.v))).collect();
    let masks = build_task_masks(&psi, universe);
    let communities: Vec<Vec<Edge>> = gts.communities.iter().map(|c| c.edges.clone()).collect();
    let table = f1_table(&masks, &communities);
    let membership = gts.edge_membership();

    let instances = split
        .test_edges
        .iter()
        .filter_map(|e| {
            let c = *membership.get(e)?;
            let id = g.edge_id(e)?;
            let f1: Vec<f64> = table.iter().map(|row| row[c]).collect();
            Some(InstanceScore {
                instance: format!("{}-{}", g.node_token(e.u), g.node_token(e.v)),
                g_index: c,
                plausibility: plausibility_from_scores(&psi[id], &f1),
            })
        })
        .collect();
    summarize(Task::LinkPrediction, auc, instances)
}

/// Node classification: community nodes against background nodes on a
/// random node split; task masks cover every node.
pub fn run_node_task<T: Scalar>(h: &Matrix<T>, gts: &GroundTruth, cfg: &TaskConfig) -> Result<TaskReport> {
    let n = h.rows();
    let membership = gts.node_membership(n);
    if membership.iter().all(Option::is_some) {
        return Err(Error::Degenerate("node classification needs background nodes".into()));
    }
    if !(cfg.node_test_fraction > 0.0 && cfg.node_test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "node_test_fraction must lie in (0, 1), got {}",
            cfg.node_test_fraction
        )));
    }
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_test = ((cfg.node_test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let (test, train) = order.split_at(n_test);
    let mut test = test.to_vec();
    test.sort_unstable();

    let features: Vec<Vec<f64>> = (0..n).map(|u| node_features(h, u)).collect();
    let x: Vec<Vec<f64>> = train.iter().map(|&u| features[u].clone()).collect();
    let y: Vec<bool> = train.iter().map(|&u| membership[u].is_some()).collect();
    let model = fit_logreg(&x, &y, &cfg.logreg)?;

    let scores: Vec<f64> = test.iter().map(|&u| model.logit(&features[u])).collect();
    let labels: Vec<bool> = test.iter().map(|&u| membership[u].is_some()).collect();
    let auc = auc_pr(&scores, &labels)?;

    let keys: Vec<NodeId> = (0..n).collect();
    let psi: Vec<Vec<f64>> = features.iter().map(|x| linear_shap(&model, x)).collect();
    let masks = build_task_masks(&psi, &keys);
    let communities: Vec<Vec<NodeId>> = gts.communities.iter().map(|c| c.nodes.clone()).collect();
    let table = f1_table(&masks, &communities);

    let instances = test
        .iter()
        .filter_map(|&u| {
            let c = membership[u]?;
            let f1: Vec<f64> = table.iter().map(|row| row[c]).collect();
            Some(InstanceScore {
                instance: u.to_string(),
                g_index: c,
                plausibility: plausibility_from_scores(&psi[u], &f1),
            })
        })
        .collect();
    summarize(Task::NodeClassification, auc, instances)
}
