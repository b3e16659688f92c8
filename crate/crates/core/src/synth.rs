//! Synthetic benchmarks with planted cliques as ground-truth substructures.
//!
//! Node layout: background nodes (BA/ER kinds) come first, followed by the
//! cliques in order. Clique nodes are labelled by clique index, background
//! nodes by `-1`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_non_edges, Community, Edge, Graph, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[serde(alias = "ring_cliques")]
    Ring,
    #[serde(alias = "sbm_cliques")]
    Sbm,
    #[serde(alias = "ba_cliques")]
    Ba,
    #[serde(alias = "er_cliques")]
    Er,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [SynthKind::Ring, SynthKind::Sbm, SynthKind::Ba, SynthKind::Er];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Ring => "ring",
            SynthKind::Sbm => "sbm",
            SynthKind::Ba => "ba",
            SynthKind::Er => "er",
        }
    }

    /// Whether the graph has background (non-clique) nodes.
    pub fn has_background(self) -> bool {
        matches!(self, SynthKind::Ba | SynthKind::Er)
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" | "ring_cliques" | "ring-cl" => Ok(SynthKind::Ring),
            "sbm" | "sbm_cliques" => Ok(SynthKind::Sbm),
            "ba" | "ba_cliques" | "ba-cl" => Ok(SynthKind::Ba),
            "er" | "er_cliques" | "er-cl" => Ok(SynthKind::Er),
            other => Err(Error::InvalidConfig(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub num_cliques: usize,
    pub clique_size: usize,
    pub base_nodes: usize,
    pub attach_edges_per_clique: usize,
    pub er_p: f64,
    pub sbm_p_out: f64,
    pub ba_m: usize,
    pub noise_edges: usize,
    pub seed: u64,
}

const MAX_CONNECT_RETRIES: u64 = 100;

/// Parameters whose expected node and edge counts match the reference
/// benchmark statistics (320/1619, 320/1957, 640/~3138, 640/~4196).
pub fn default_spec(kind: SynthKind) -> SynthSpec {
    let base = SynthSpec {
        kind,
        num_cliques: 32,
        clique_size: 10,
        base_nodes: 320,
        attach_edges_per_clique: 1,
        er_p: 0.0,
        sbm_p_out: 0.0,
        ba_m: 5,
        noise_edges: 0,
        seed: 0,
    };
    match kind {
        SynthKind::Ring => SynthSpec {
            noise_edges: 147,
            base_nodes: 0,
            ..base
        },
        SynthKind::Sbm => SynthSpec {
            sbm_p_out: 517.0 / 49600.0,
            base_nodes: 0,
            ..base
        },
        SynthKind::Ba => base,
        SynthKind::Er => SynthSpec {
            er_p: 2724.0 / 51040.0,
            ..base
        },
    }
}

impl SynthSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_cliques < 1 {
            return bad("num_cliques must be >= 1".into());
        }
        if self.clique_size < 2 {
            return bad("clique_size must be >= 2".into());
        }
        for (name, p) in [("er_p", self.er_p), ("sbm_p_out", self.sbm_p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.kind.has_background() && self.base_nodes < 1 {
            return bad("base_nodes must be >= 1".into());
        }
        if self.kind == SynthKind::Ba && (self.ba_m < 1 || self.ba_m >= self.base_nodes) {
            return bad(format!(
                "ba_m must lie in [1, base_nodes), got {} with {} base nodes",
                self.ba_m, self.base_nodes
            ));
        }
        Ok(())
    }

    pub fn total_nodes(&self) -> usize {
        let base = if self.kind.has_background() { self.base_nodes } else { 0 };
        base + self.num_cliques * self.clique_size
    }
}

/// Generates the graph and its clique ground truth, deterministically in `spec.seed`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Graph, GroundTruth)> {
    spec.validate()?;
    match spec.kind {
        SynthKind::Ring | SynthKind::Sbm => build(spec, spec.seed),
        SynthKind::Ba | SynthKind::Er => {
            for attempt in 0..MAX_CONNECT_RETRIES {
                let (g, gt) = build(spec, spec.seed.wrapping_add(attempt))?;
                if g.is_connected() {
                    return Ok((g, gt));
                }
            }
            Err(Error::Degenerate(format!(
                "no connected {} graph after {MAX_CONNECT_RETRIES} attempts",
                spec.kind
            )))
        }
    }
}

fn build(spec: &SynthSpec, seed: u64) -> Result<(Graph, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = if spec.kind.has_background() { spec.base_nodes } else { 0 };
    let n = spec.total_nodes();
    let k = spec.clique_size;
    let clique_nodes = |c: usize| base + c * k..base + (c + 1) * k;

    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut communities = Vec::with_capacity(spec.num_cliques);
    for c in 0..spec.num_cliques {
        let nodes: Vec<usize> = clique_nodes(c).collect();
        let mut ce = Vec::with_capacity(k * (k - 1) / 2);
        for (i, &a) in nodes.iter().enumerate() {
            for &b in &nodes[i + 1..] {
                ce.push(Edge::new(a, b));
                edges.push((a, b));
            }
        }
        communities.push(Community::from_edges(ce));
    }

    match spec.kind {
        SynthKind::Ring => {
            let m = spec.num_cliques;
            if m > 1 {
                // clique i's second node joins clique i+1's first node
                for c in 0..m {
                    let a = c * k + 1;
                    let b = ((c + 1) % m) * k;
                    edges.push((a, b));
                }
            }
        }
        SynthKind::Sbm => {
            for a in 0..n {
                for b in a + 1..n {
                    if a / k != b / k && rng.gen_bool(spec.sbm_p_out) {
                        edges.push((a, b));
                    }
                }
            }
        }
        SynthKind::Ba => {
            edges.extend(barabasi_albert(base, spec.ba_m, &mut rng));
            attach_cliques(spec, base, &mut edges, &mut rng);
        }
        SynthKind::Er => {
            for a in 0..base {
                for b in a + 1..base {
                    if rng.gen_bool(spec.er_p) {
                        edges.push((a, b));
                    }
                }
            }
            attach_cliques(spec, base, &mut edges, &mut rng);
        }
    }

    let mut g = Graph::from_edges(n, edges)?;
    if spec.noise_edges > 0 {
        let noise = sample_non_edges(&g, spec.noise_edges, &HashSet::new(), &mut rng)?;
        let all = g.edges().iter().chain(noise.iter()).map(|e| (e.u, e.v)).collect::<Vec<_>>();
        g = Graph::from_edges(n, all)?;
    }

    let mut labels = vec![-1i64; n];
    for c in 0..spec.num_cliques {
        for v in clique_nodes(c) {
            labels[v] = c as i64;
        }
    }
    Ok((
        g,
        GroundTruth {
            communities,
            labels: Some(labels),
        },
    ))
}

/// Preferential attachment starting from a star on `m + 1` nodes.
fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|i| (0, i)).collect();
    let mut repeated: Vec<usize> = Vec::new();
    for (a, b) in &edges {
        repeated.push(*a);
        repeated.push(*b);
    }
    for source in m + 1..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = *repeated.choose(rng).expect("non-empty");
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat(source).take(m));
    }
    edges
}

fn attach_cliques(spec: &SynthSpec, base: usize, edges: &mut Vec<(usize, usize)>, rng: &mut ChaCha8Rng) {
    let k = spec.clique_size;
    for c in 0..spec.num_cliques {
        for _ in 0..spec.attach_edges_per_clique {
            let a = base + c * k + rng.gen_range(0..k);
            let b = rng.gen_range(0..base);
            edges.push((a, b));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SynthKind) -> SynthSpec {
        default_spec(kind).with_seed(11)
    }

    #[test]
    fn ring_without_noise_has_closed_form_edge_count() {
        let s = SynthSpec {
            noise_edges: 0,
            ..spec(SynthKind::Ring)
        };
        let (g, gt) = generate_synthetic(&s).unwrap();
        assert_eq!(g.num_nodes(), 320);
        assert_eq!(g.num_edges(), 32 * 45 + 32);
        assert_eq!(gt.communities.len(), 32);
        assert!(g.is_connected());
    }

    #[test]
    fn ring_default_matches_reference_statistics() {
        let (g, _) = generate_synthetic(&spec(SynthKind::Ring)).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (320, 1619));
    }

    #[test]
    fn sbm_without_inter_edges_is_disjoint_cliques() {
        let s = SynthSpec {
            sbm_p_out: 0.0,
            ..spec(SynthKind::Sbm)
        };
        let (g, _) = generate_synthetic(&s).unwrap();
        assert_eq!(g.num_edges(), 1440);
        assert_eq!(g.components().len(), 32);
    }

    #[test]
    fn sbm_default_edge_count_near_reference() {
        let (g, _) = generate_synthetic(&spec(SynthKind::Sbm)).unwrap();
        assert_eq!(g.num_nodes(), 320);
        let rel = (g.num_edges() as f64 - 1957.0).abs() / 1957.0;
        assert!(rel < 0.1, "{} edges", g.num_edges());
    }

    #[test]
    fn ba_default_sizes() {
        let (g, gt) = generate_synthetic(&spec(SynthKind::Ba)).unwrap();
        assert_eq!(g.num_nodes(), 640);
        // 5·315 base edges + 32 cliques + 32 attachments, barring collisions
        assert_eq!(g.num_edges(), 5 * 315 + 1440 + 32);
        let rel = (g.num_edges() as f64 - 3138.0).abs() / 3138.0;
        assert!(rel <= 0.1);
        assert!(g.is_connected());
        let labels = gt.labels.unwrap();
        assert_eq!(labels.iter().filter(|&&l| l < 0).count(), 320);
    }

    #[test]
    fn er_default_sizes() {
        let (g, _) = generate_synthetic(&spec(SynthKind::Er)).unwrap();
        assert_eq!(g.num_nodes(), 640);
        let rel = (g.num_edges() as f64 - 4196.0).abs() / 4196.0;
        assert!(rel < 0.1, "{} edges", g.num_edges());
        assert!(g.is_connected());
    }

    #[test]
    fn cliques_are_complete() {
        for kind in SynthKind::ALL {
            let (g, gt) = generate_synthetic(&spec(kind)).unwrap();
            for c in &gt.communities {
                assert_eq!(c.edges.len(), 45);
                assert_eq!(c.nodes.len(), 10);
                for (i, &a) in c.nodes.iter().enumerate() {
                    for &b in &c.nodes[i + 1..] {
                        assert!(g.has_edge(a, b));
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_edges() {
        for kind in SynthKind::ALL {
            let (a, _) = generate_synthetic(&spec(kind)).unwrap();
            let (b, _) = generate_synthetic(&spec(kind)).unwrap();
            assert_eq!(a.edges(), b.edges());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let s = SynthSpec {
            clique_size: 1,
            ..spec(SynthKind::Ring)
        };
        assert!(generate_synthetic(&s).is_err());
        let s = SynthSpec {
            er_p: 1.5,
            ..spec(SynthKind::Er)
        };
        assert!(generate_synthetic(&s).is_err());
        assert!("house".parse::<SynthKind>().is_err());
    }

    #[test]
    fn default_probabilities() {
        assert!((default_spec(SynthKind::Sbm).sbm_p_out - 0.010423).abs() < 1e-5);
        assert!((default_spec(SynthKind::Er).er_p - 0.053370).abs() < 1e-5);
    }
}
