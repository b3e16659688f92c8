//! Per-dimension edge attributions and the explanation subgraphs they induce.
//!
//! For dimension `d` the attribution of an edge is its dimension-`d`
//! contribution to the decoder logit minus the mean contribution over a
//! background edge set:
//!
//! ```text
//! φ_d(u, v) = h_d(u) h_d(v) − μ_d,   μ_d = mean over background of h_d(u′) h_d(v′)
//! ```
//!
//! This is the LinearSHAP value of the dot-product decoder with the
//! background edges as reference data. The explanation mask of `d` keeps the
//! positive part of `φ_d` on the background edges.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};
use crate::mask::EdgeMask;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionContext {
    /// Mean edge product per dimension over the background edges.
    pub mu: Vec<f64>,
}

impl AttributionContext {
    pub fn new<T: Scalar>(h: &Matrix<T>, background: &[Edge]) -> Result<Self> {
        if background.is_empty() {
            return Err(Error::Degenerate("empty background edge set".into()));
        }
        let mut mu = vec![0.0; h.cols()];
        for e in background {
            for (d, m) in mu.iter_mut().enumerate() {
                *m += h[(e.u, d)].f64() * h[(e.v, d)].f64();
            }
        }
        let n = background.len() as f64;
        mu.iter_mut().for_each(|m| *m /= n);
        Ok(AttributionContext { mu })
    }
}

/// `φ_d(u, v)`
#[inline]
pub fn attribution<T: Scalar>(h: &Matrix<T>, ctx: &AttributionContext, d: usize, u: NodeId, v: NodeId) -> f64 {
    h[(u, d)].f64() * h[(v, d)].f64() - ctx.mu[d]
}

#[derive(Debug, Clone)]
pub struct Explanation {
    pub context: AttributionContext,
    pub masks: Vec<EdgeMask>,
}

impl Explanation {
    pub fn dims(&self) -> usize {
        self.masks.len()
    }

    /// `E_d`, sorted.
    pub fn edge_set(&self, d: usize) -> Vec<Edge> {
        self.masks[d].keys().collect()
    }

    /// `V_d`: endpoints of `E_d`, sorted.
    pub fn node_set(&self, d: usize) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self.masks[d].keys().flat_map(|e| [e.u, e.v]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Dimensions whose explanation subgraph is empty.
    pub fn empty_dims(&self) -> Vec<usize> {
        (0..self.dims()).filter(|&d| self.masks[d].is_empty()).collect()
    }

    pub fn to_json(&self, g: &Graph) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dim {
            dim: usize,
            edges: Vec<Option<usize>>,
            weights: Vec<f64>,
        }
        let dims: Vec<Dim> = self
            .masks
            .iter()
            .enumerate()
            .map(|(dim, m)| Dim {
                dim,
                edges: m.keys().map(|e| g.edge_id(&e)).collect(),
                weights: m.entries().iter().map(|e| e.1).collect(),
            })
            .collect();
        serde_json::json!({ "background_mean": self.context.mu, "dimensions": dims })
    }

    /// `u,v,weight,dim` rows with node tokens.
    pub fn write_triplets(&self, g: &Graph, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        writeln!(out, "u,v,weight,dim")?;
        for (d, m) in self.masks.iter().enumerate() {
            for (e, w) in m.entries() {
                writeln!(out, "{},{},{},{}", g.node_token(e.u), g.node_token(e.v), w, d)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Masks `M^(d)` with weights `max(0, φ_d)` over the background edges.
pub fn build_explanations<T: Scalar>(h: &Matrix<T>, background: &[Edge]) -> Result<Explanation> {
    let context = AttributionContext::new(h, background)?;
    let masks = (0..h.cols())
        .map(|d| EdgeMask::from_weights(background.iter().map(|e| (*e, attribution(h, &context, d, e.u, e.v)))))
        .collect();
    Ok(Explanation { context, masks })
}

/// Exact affiliation matrix `F[u, d] = Σ_{v ∈ V_d} φ_d(u, v)`.
pub fn affiliation_matrix<T: Scalar>(h: &Matrix<T>, expl: &Explanation) -> Matrix<f64> {
    let mut f = Matrix::zeros(h.rows(), h.cols());
    for d in 0..h.cols() {
        let nodes = expl.node_set(d);
        if nodes.is_empty() {
            continue;
        }
        let mass: f64 = nodes.iter().map(|&v| h[(v, d)].f64()).sum();
        let offset = nodes.len() as f64 * expl.context.mu[d];
        for u in 0..h.rows() {
            f[(u, d)] = h[(u, d)].f64() * mass - offset;
        }
    }
    f
}
