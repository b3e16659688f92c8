//! Interpretability metrics for dimension-wise explanations:
//! comprehensibility, sparsity, overlap consistency, feature-proximity
//! correlation / positional coherence, plus the statistical helpers they
//! share (Pearson correlation, Jaccard index, average precision).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::graph::{AnchorDistances, Edge, GroundTruth, NodeId, UNREACHABLE};
use crate::mask::{EdgeMask, Mask};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Why a metric has no value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Undefined(pub String);

impl fmt::Display for Undefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type MetricResult = std::result::Result<f64, Undefined>;

fn undefined(msg: impl Into<String>) -> MetricResult {
    Err(Undefined(msg.into()))
}

/// A metric value, or `null` together with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<MetricResult> for MetricValue {
    fn from(r: MetricResult) -> Self {
        match r {
            Ok(v) => MetricValue {
                value: Some(v),
                reason: None,
            },
            Err(Undefined(reason)) => MetricValue {
                value: None,
                reason: Some(reason),
            },
        }
    }
}

/// Weighted-precision / binarised-recall F1 of a mask against one community.
///
/// Precision sums mask weight inside the community over total mask weight;
/// recall counts supported community items over the community size.
pub fn f1_score<K: Ord + Copy + Hash>(mask: &Mask<K>, community: &HashSet<K>) -> f64 {
    let total = mask.total();
    if total <= 0.0 || community.is_empty() {
        return 0.0;
    }
    let (mut inside, mut hits) = (0.0, 0usize);
    for (k, w) in mask.entries() {
        if community.contains(k) {
            inside += w;
            hits += 1;
        }
    }
    let prec = inside / total;
    let rec = hits as f64 / community.len() as f64;
    if prec + rec == 0.0 {
        0.0
    } else {
        2.0 * prec * rec / (prec + rec)
    }
}

/// Edge → community lookup for repeated comprehensibility evaluations.
#[derive(Debug, Clone)]
pub struct CommunityIndex {
    membership: HashMap<Edge, Vec<usize>>,
    sizes: Vec<usize>,
}

impl CommunityIndex {
    pub fn new(gts: &GroundTruth) -> Self {
        let mut membership: HashMap<Edge, Vec<usize>> = HashMap::new();
        for (i, c) in gts.communities.iter().enumerate() {
            for e in &c.edges {
                membership.entry(*e).or_default().push(i);
            }
        }
        CommunityIndex {
            membership,
            sizes: gts.communities.iter().map(|c| c.edges.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Best F1 over communities and the index attaining it.
    pub fn comprehensibility(&self, mask: &EdgeMask) -> (f64, Option<usize>) {
        let total = mask.total();
        if total <= 0.0 || self.sizes.is_empty() {
            return (0.0, None);
        }
        let mut inside = vec![0.0; self.sizes.len()];
        let mut hits = vec![0usize; self.sizes.len()];
        for (e, w) in mask.entries() {
            if let Some(cs) = self.membership.get(e) {
                for &c in cs {
                    inside[c] += w;
                    hits[c] += 1;
                }
            }
        }
        let mut best = (0.0, None);
        for c in 0..self.sizes.len() {
            let prec = inside[c] / total;
            let rec = hits[c] as f64 / self.sizes[c] as f64;
            let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
            if best.1.is_none() || f1 > best.0 {
                best = (f1, Some(c));
            }
        }
        best
    }
}

/// Maximum F1 over ground-truth communities; an empty mask scores 0.
pub fn comprehensibility(mask: &EdgeMask, gts: &GroundTruth) -> (f64, Option<usize>) {
    CommunityIndex::new(gts).comprehensibility(mask)
}

/// Normalised Shannon entropy of the mask weights over `total_edges`
/// possible edges; 0 for an empty mask.
pub fn sparsity<K: Ord + Copy>(mask: &Mask<K>, total_edges: usize) -> f64 {
    let total = mask.total();
    if total <= 0.0 || total_edges < 2 {
        return 0.0;
    }
    let ent: f64 = mask
        .entries()
        .iter()
        .map(|(_, w)| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    (ent / (total_edges as f64).ln()).clamp(0.0, 1.0)
}

/// `|a ∩ b| / |a ∪ b|`, 0 when both are empty.
pub fn jaccard<K: Eq + Hash + Copy>(a: &[K], b: &[K]) -> f64 {
    let sa: HashSet<K> = a.iter().copied().collect();
    let sb: HashSet<K> = b.iter().copied().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Pearson correlation with mean subtraction first.
pub fn pearson(x: &[f64], y: &[f64]) -> MetricResult {
    if x.len() != y.len() || x.len() < 2 {
        return undefined("need two equally long vectors of length >= 2");
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let scale = mx.abs().max(my.abs()).max(1.0);
    let tol = 1e-24 * n * scale * scale;
    if sxx <= tol || syy <= tol {
        return undefined("zero variance");
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn column_f64<T: Scalar>(h: &Matrix<T>, c: usize) -> Vec<f64> {
    (0..h.rows()).map(|r| h[(r, c)].f64()).collect()
}

/// Pearson correlation between pairwise explanation overlaps and squared
/// pairwise feature correlations, over all dimension pairs `d < l`.
pub fn overlap_consistency<T: Scalar>(h: &Matrix<T>, expl: &Explanation) -> MetricResult {
    let k = h.cols();
    if k < 3 {
        return undefined(format!("needs at least 3 dimensions, got {k}"));
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|c| column_f64(h, c)).collect();
    let sets: Vec<Vec<Edge>> = (0..k).map(|d| expl.edge_set(d)).collect();
    let (mut jsi, mut r2) = (Vec::new(), Vec::new());
    for d in 0..k {
        for l in d + 1..k {
            if let Ok(r) = pearson(&cols[d], &cols[l]) {
                jsi.push(jaccard(&sets[d], &sets[l]));
                r2.push(r * r);
            }
        }
    }
    overlap_consistency_from_pairs(&jsi, &r2)
}

/// Correlation of condensed overlap and squared-correlation vectors.
pub fn overlap_consistency_from_pairs(jsi: &[f64], r2: &[f64]) -> MetricResult {
    if jsi.len() < 3 {
        return undefined("fewer than 3 dimension pairs with defined correlation");
    }
    pearson(jsi, r2).map_err(|e| Undefined(format!("overlap consistency: {e}")))
}

/// `ζ(u, anchors) = Σ_{v ∈ anchors} 1 / (1 + dist(u, v))` for every node `u`;
/// unreachable anchors contribute 0. `dist` must hold all-pairs rows.
pub fn proximity_vector(dist: &AnchorDistances, anchors: &[NodeId]) -> Vec<f64> {
    let mut zeta = vec![0.0; dist.num_nodes];
    for &a in anchors {
        for (z, &d) in zeta.iter_mut().zip(dist.row(a)) {
            if d != UNREACHABLE {
                *z += 1.0 / (1.0 + d as f64);
            }
        }
    }
    zeta
}

/// Feature-proximity correlation between proximity to `V_d` and feature `l`.
pub fn fpc<T: Scalar>(h: &Matrix<T>, expl: &Explanation, d: usize, l: usize, dist: &AnchorDistances) -> MetricResult {
    let anchors = expl.node_set(d);
    if anchors.is_empty() {
        return undefined(format!("dimension {d} has an empty explanation subgraph"));
    }
    pearson(&proximity_vector(dist, &anchors), &column_f64(h, l))
}

/// Full `K × K` table of FPC values; `None` where undefined.
pub fn fpc_matrix<T: Scalar>(h: &Matrix<T>, expl: &Explanation, dist: &AnchorDistances) -> Vec<Vec<Option<f64>>> {
    let k = h.cols();
    let cols: Vec<Vec<f64>> = (0..k).map(|c| column_f64(h, c)).collect();
    (0..k)
        .map(|d| {
            let anchors = expl.node_set(d);
            if anchors.is_empty() {
                return vec![None; k];
            }
            let zeta = proximity_vector(dist, &anchors);
            cols.iter().map(|c| pearson(&zeta, c).ok()).collect()
        })
        .collect()
}

/// Uniform random permutations of `0..k`, fixed points included.
pub fn random_permutations(k: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p: Vec<usize> = (0..k).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

/// Ratio of the summed diagonal FPC to the average summed FPC under the
/// given permutations. Undefined entries are skipped in both.
pub fn positional_coherence_from_fpc(fpc: &[Vec<Option<f64>>], perms: &[Vec<usize>]) -> MetricResult {
    let diag: Vec<f64> = (0..fpc.len()).filter_map(|d| fpc[d][d]).collect();
    if diag.len() < 2 {
        return undefined("fewer than 2 defined diagonal FPC values");
    }
    if perms.is_empty() {
        return undefined("no permutations");
    }
    let numerator: f64 = diag.iter().sum();
    let denom = perms
        .iter()
        .map(|p| (0..fpc.len()).filter_map(|d| fpc[d][p[d]]).sum::<f64>())
        .sum::<f64>()
        / perms.len() as f64;
    if denom.abs() < 1e-9 {
        return undefined("permuted FPC average is zero");
    }
    Ok(numerator / denom)
}

pub fn positional_coherence<T: Scalar>(
    h: &Matrix<T>,
    expl: &Explanation,
    dist: &AnchorDistances,
    num_permutations: usize,
    seed: u64,
) -> MetricResult {
    let table = fpc_matrix(h, expl, dist);
    positional_coherence_from_fpc(&table, &random_permutations(h.cols(), num_permutations, seed))
}

/// Average precision: descending stable sort by score, precision averaged
/// over the ranks of the positives.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Degenerate("average precision needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let (mut tp, mut ap) = (0usize, 0.0);
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
            ap += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricToggles {
    pub comprehensibility: bool,
    pub sparsity: bool,
    pub ovc: bool,
    pub poc: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        MetricToggles {
            comprehensibility: true,
            sparsity: true,
            ovc: true,
            poc: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dim: usize,
    pub edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comprehensibility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_community: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comprehensibility_mean: Option<f64>,
    /// `1 − mean_d Sp(M^(d))`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ovc: Option<MetricValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poc: Option<MetricValue>,
    pub empty_dims: usize,
    pub per_dimension: Vec<DimensionReport>,
}

/// Embedding-level metrics over an explanation whose masks live on
/// `num_background` edges. `dist` (all-pairs) is needed for PoC only.
pub fn embedding_metrics<T: Scalar>(
    h: &Matrix<T>,
    expl: &Explanation,
    gts: &GroundTruth,
    num_background: usize,
    dist: Option<&AnchorDistances>,
    toggles: &MetricToggles,
    num_permutations: usize,
    seed: u64,
) -> Result<EmbeddingMetrics> {
    let k = expl.dims();
    let index = CommunityIndex::new(gts);
    if toggles.comprehensibility && index.is_empty() {
        return Err(Error::Degenerate("comprehensibility needs at least one community".into()));
    }
    let mut per_dimension = Vec::with_capacity(k);
    for d in 0..k {
        let mask = &expl.masks[d];
        let (comp, best) = if toggles.comprehensibility {
            let (c, b) = index.comprehensibility(mask);
            (Some(c), b)
        } else {
            (None, None)
        };
        per_dimension.push(DimensionReport {
            dim: d,
            edges: mask.len(),
            comprehensibility: comp,
            best_community: if mask.is_empty() { None } else { best },
            sparsity: toggles.sparsity.then(|| sparsity(mask, num_background)),
        });
    }
    let mean = |f: &dyn Fn(&DimensionReport) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = per_dimension.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let comprehensibility_mean = mean(&|r| r.comprehensibility);
    let sparsity_score = mean(&|r| r.sparsity).map(|m| 1.0 - m);
    let ovc = toggles.ovc.then(|| overlap_consistency(h, expl).into());
    let poc = if toggles.poc {
        let dist = dist.ok_or_else(|| Error::InvalidConfig("positional coherence needs distances".into()))?;
        Some(positional_coherence(h, expl, dist, num_permutations, seed).into())
    } else {
        None
    };
    Ok(EmbeddingMetrics {
        comprehensibility_mean,
        sparsity_score,
        ovc,
        poc,
        empty_dims: expl.empty_dims().len(),
        per_dimension,
    })
}
