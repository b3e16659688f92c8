//! Uniform random-walk corpus and the positive/negative pair streams of the
//! skip-gram objective.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NegativeDistribution {
    /// Corrupted endpoint drawn uniformly over all nodes.
    #[default]
    Uniform,
    /// Corrupted endpoint drawn proportionally to degree^0.75.
    Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub num_walks: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub negative_distribution: NegativeDistribution,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 20,
            num_walks: 10,
            window: 5,
            negatives_per_positive: 1,
            negative_distribution: NegativeDistribution::Uniform,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 1 || self.num_walks < 1 || self.window < 1 || self.negatives_per_positive < 1 {
            return Err(Error::InvalidConfig("walk counts must all be >= 1".into()));
        }
        if self.window >= self.walk_length {
            return Err(Error::InvalidConfig(format!(
                "window {} must be shorter than walk_length {}",
                self.window, self.walk_length
            )));
        }
        Ok(())
    }
}

fn node_rng(seed: u64, node: NodeId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

/// `num_walks` uniform walks from every node, grouped by start node.
pub fn generate_walks(g: &Graph, cfg: &WalkConfig) -> Vec<Vec<NodeId>> {
    (0..g.num_nodes())
        .into_par_iter()
        .map(|start| {
            let mut rng = node_rng(cfg.seed, start);
            (0..cfg.num_walks)
                .map(|_| {
                    let mut walk = Vec::with_capacity(cfg.walk_length);
                    walk.push(start);
                    let mut cur = start;
                    while walk.len() < cfg.walk_length {
                        let nbrs = g.neighbors(cur);
                        if nbrs.is_empty() {
                            break;
                        }
                        cur = nbrs[rng.gen_range(0..nbrs.len())];
                        walk.push(cur);
                    }
                    walk
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Ordered co-occurrence pairs within `window` steps, both directions, self pairs dropped.
pub fn pairs_from_walks(walks: &[Vec<NodeId>], window: usize) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for walk in walks {
        for i in 0..walk.len() {
            for j in i + 1..walk.len().min(i + window + 1) {
                let (a, b) = (walk[i], walk[j]);
                if a != b {
                    out.push((a, b));
                    out.push((b, a));
                }
            }
        }
    }
    out
}

/// `k` corrupted pairs `(u', v)` per positive `(u, v)`.
pub fn sample_negatives(
    g: &Graph,
    positives: &[(NodeId, NodeId)],
    k: usize,
    distribution: NegativeDistribution,
    seed: u64,
) -> Vec<(NodeId, NodeId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.num_nodes();
    let mut out = Vec::with_capacity(positives.len() * k);
    match distribution {
        NegativeDistribution::Uniform => {
            for &(_, v) in positives {
                for _ in 0..k {
                    out.push((rng.gen_range(0..n), v));
                }
            }
        }
        NegativeDistribution::Degree => {
            let weights: Vec<f64> = (0..n).map(|v| (g.degree(v) as f64).powf(0.75) + 1e-12).collect();
            let dist = WeightedIndex::new(&weights).expect("positive weights");
            for &(_, v) in positives {
                for _ in 0..k {
                    out.push((dist.sample(&mut rng), v));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBatch {
    pub positives: Vec<(NodeId, NodeId)>,
    pub negatives: Vec<(NodeId, NodeId)>,
}

impl PairBatch {
    /// Walk corpus, positives and negatives for one training run.
    pub fn from_graph(g: &Graph, cfg: &WalkConfig) -> Result<Self> {
        cfg.validate()?;
        if g.num_nodes() == 0 {
            return Err(Error::GraphTooSmall("empty graph".into()));
        }
        let walks = generate_walks(g, cfg);
        let positives = pairs_from_walks(&walks, cfg.window);
        let negatives = sample_negatives(
            g,
            &positives,
            cfg.negatives_per_positive,
            cfg.negative_distribution,
            cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        );
        Ok(PairBatch { positives, negatives })
    }

    /// Splits into consecutive minibatches of `size` positives (with their negatives).
    pub fn chunks(&self, size: usize) -> Vec<PairBatch> {
        let size = size.max(1);
        let k = if self.positives.is_empty() {
            1
        } else {
            (self.negatives.len() / self.positives.len()).max(1)
        };
        self.positives
            .chunks(size)
            .zip(self.negatives.chunks(size * k))
            .map(|(p, n)| PairBatch {
                positives: p.to_vec(),
                negatives: n.to_vec(),
            })
            .collect()
    }

    pub fn aggregate(&self) -> TrainingBatch {
        TrainingBatch {
            positives: WeightedPairs::from_pairs(&self.positives),
            negatives: WeightedPairs::from_pairs(&self.negatives),
        }
    }
}

/// Unordered pairs with multiplicities. The dot-product loss is symmetric,
/// so `(u, v)` and `(v, u)` collapse into one weighted term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedPairs {
    pub pairs: Vec<(NodeId, NodeId)>,
    pub weights: Vec<f64>,
    /// Number of raw pairs aggregated.
    pub count: usize,
}

impl WeightedPairs {
    pub fn from_pairs(raw: &[(NodeId, NodeId)]) -> Self {
        let mut counts: HashMap<(NodeId, NodeId), f64> = HashMap::with_capacity(raw.len() / 4);
        for &(a, b) in raw {
            let key = if a <= b { (a, b) } else { (b, a) };
            *counts.entry(key).or_default() += 1.0;
        }
        let mut entries: Vec<_> = counts.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        let (pairs, weights) = entries.into_iter().unzip();
        WeightedPairs {
            pairs,
            weights,
            count: raw.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingBatch {
    pub positives: WeightedPairs,
    pub negatives: WeightedPairs,
}
