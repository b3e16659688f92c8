//! Shallow encoders mapping identity node features to non-negative
//! embeddings `H = ρ(Z·W)`, with `Z = W1` (fully connected) or `Z = Â·W1`
//! (one graph convolution), and the dot-product edge decoder.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::matrix::{dot, Matrix};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Fc,
    Gcn,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Fc => "fc",
            EncoderKind::Gcn => "gcn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Softplus => {
                // log(1 + e^x) without overflow
                if x > T::c(20.0) {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Softplus => sigmoid(x),
        }
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` in CSR form.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency<T> {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn new(g: &Graph) -> Self {
        let n = g.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * g.num_edges() + n);
        let mut vals = Vec::with_capacity(cols.capacity());
        offsets.push(0);
        for u in 0..n {
            let mut row: Vec<usize> = g.neighbors(u).to_vec();
            row.push(u);
            row.sort_unstable();
            for v in row {
                cols.push(v);
                vals.push(T::c(inv_sqrt[u] * inv_sqrt[v]));
            }
            offsets.push(cols.len());
        }
        NormalizedAdjacency { n, offsets, cols, vals }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for u in 0..self.n {
            for (v, a) in self.row(u) {
                m[(u, v)] = a;
            }
        }
        m
    }

    /// `Â · x`. Â is symmetric, so this also serves as `Âᵀ · x`.
    pub fn mul(&self, x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.rows(), self.n, "adjacency product shape mismatch");
        let mut out = Matrix::zeros(self.n, x.cols());
        for u in 0..self.n {
            let mut acc = vec![T::zero(); x.cols()];
            for (v, a) in self.row(u) {
                for (o, &b) in acc.iter_mut().zip(x.row(v)) {
                    *o += a * b;
                }
            }
            out.row_mut(u).copy_from_slice(&acc);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub kind: EncoderKind,
    pub activation: Activation,
    /// V×D; with identity input features each row is a node's first-layer vector.
    pub w1: Matrix<T>,
    /// D×K output projection.
    pub w: Matrix<T>,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn num_nodes(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            kind: self.kind,
            activation: self.activation,
            w1: self.w1.cast(),
            w: self.w.cast(),
        }
    }
}

fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::c(rng.gen_range(-s..=s)))
}

/// Glorot-uniform initialisation, deterministic in `seed`.
pub fn init_params<T: Scalar>(
    num_nodes: usize,
    kind: EncoderKind,
    activation: Activation,
    hidden: usize,
    out: usize,
    seed: u64,
) -> Result<EncoderParams<T>> {
    if num_nodes == 0 || hidden == 0 || out == 0 {
        return Err(Error::InvalidConfig(format!(
            "encoder sizes must be positive (V={num_nodes}, D={hidden}, K={out})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1 = glorot(num_nodes, hidden, &mut rng);
    let w = glorot(hidden, out, &mut rng);
    Ok(EncoderParams {
        kind,
        activation,
        w1,
        w,
    })
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub z: Matrix<T>,
    pub pre: Matrix<T>,
    pub h: Matrix<T>,
}

pub fn forward<T: Scalar>(params: &EncoderParams<T>, adj: Option<&NormalizedAdjacency<T>>) -> Result<Forward<T>> {
    let z = match params.kind {
        EncoderKind::Fc => params.w1.clone(),
        EncoderKind::Gcn => {
            let adj = adj.ok_or_else(|| Error::InvalidConfig("gcn encoder needs the normalized adjacency".into()))?;
            if adj.num_nodes() != params.num_nodes() {
                return Err(Error::Shape(format!(
                    "adjacency over {} nodes, parameters over {}",
                    adj.num_nodes(),
                    params.num_nodes()
                )));
            }
            adj.mul(&params.w1)
        }
    };
    let pre = z.matmul(&params.w);
    let act = params.activation;
    let h = pre.map(|x| act.apply(x));
    if !h.is_finite() {
        return Err(Error::NonFinite("encoder output".into()));
    }
    Ok(Forward { z, pre, h })
}

/// Final node embeddings `H` (V×K, non-negative).
pub fn encode<T: Scalar>(params: &EncoderParams<T>, g: &Graph) -> Result<Matrix<T>> {
    if params.num_nodes() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "parameters for {} nodes, graph has {}",
            params.num_nodes(),
            g.num_nodes()
        )));
    }
    let adj = match params.kind {
        EncoderKind::Gcn => Some(NormalizedAdjacency::new(g)),
        EncoderKind::Fc => None,
    };
    Ok(forward(params, adj.as_ref())?.h)
}

/// `σ(h(u)·h(v))`
pub fn edge_likelihood<T: Scalar>(h: &Matrix<T>, u: NodeId, v: NodeId) -> T {
    sigmoid(dot(h.row(u), h.row(v)))
}

/// Text export: a `V K` header followed by one row of `K` values per node.
pub fn write_embedding_text<T: Scalar>(h: &Matrix<T>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{} {}", h.rows(), h.cols())?;
    for r in 0..h.rows() {
        let line: Vec<String> = h.row(r).iter().map(|x| format!("{}", x.to_f32().unwrap_or(f32::NAN))).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_embedding_text<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty embedding file".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: 1,
            msg: "bad `V K` header".into(),
        })?;
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "header must hold two integers".into(),
        });
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines {
        let vals: Vec<f32> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: i + 1,
                msg: "bad value".into(),
            })?;
        if vals.len() != cols {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {cols} values, found {}", vals.len()),
            });
        }
        data.extend(vals.into_iter().map(|x| T::c(x as f64)));
    }
    Matrix::from_vec(rows, cols, data)
}

/// Binary export: `u32` V and `u32` K (little endian), then row-major `f32` values.
pub fn write_embedding_binary<T: Scalar>(h: &Matrix<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * h.rows() * h.cols());
    buf.extend_from_slice(&(h.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(h.cols() as u32).to_le_bytes());
    for x in h.as_slice() {
        buf.extend_from_slice(&x.to_f32_le());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_embedding_binary<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    let buf = fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    if buf.len() < 8 {
        return Err(Error::Parse {
            line: 0,
            msg: "truncated header".into(),
        });
    }
    let rows = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let body = &buf[8..];
    if body.len() != 4 * rows * cols {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {} bytes of values, found {}", 4 * rows * cols, body.len()),
        });
    }
    let data = body
        .chunks_exact(4)
        .map(|c| T::c(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_params::<f32>(10, EncoderKind::Fc, Activation::Relu, 4, 3, 9).unwrap();
        let b = init_params::<f32>(10, EncoderKind::Fc, Activation::Relu, 4, 3, 9).unwrap();
        assert_eq!(a, b);
        let p = init_params::<f64>(1, EncoderKind::Fc, Activation::Relu, 1, 1, 1).unwrap();
        let s = (6.0f64 / 2.0).sqrt();
        assert!(p.w1[(0, 0)].abs() <= s && p.w[(0, 0)].abs() <= s);
        assert!(init_params::<f64>(3, EncoderKind::Fc, Activation::Relu, 0, 1, 1).is_err());
    }

    #[test]
    fn init_mean_is_zero_within_three_sigma() {
        // 316·316 ≈ 10^5 entries, uniform on [-s, s] has variance s²/3
        let p = init_params::<f64>(316, EncoderKind::Fc, Activation::Relu, 316, 1, 4).unwrap();
        let n = p.w1.as_slice().len() as f64;
        let mean = p.w1.as_slice().iter().sum::<f64>() / n;
        let s = (6.0f64 / 632.0).sqrt();
        let sigma = (s * s / 3.0 / n).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "{mean} vs {sigma}");
    }

    #[test]
    fn fc_with_identity_projection_returns_w1() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let w1 = Matrix::from_fn(3, 2, |r, c| (r + c) as f64 * 0.5);
        let p = EncoderParams {
            kind: EncoderKind::Fc,
            activation: Activation::Relu,
            w1: w1.clone(),
            w: Matrix::identity(2),
        };
        assert_eq!(encode(&p, &g).unwrap(), w1);
    }

    #[test]
    fn relu_clips_negative_preactivations() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let p = EncoderParams {
            kind: EncoderKind::Fc,
            activation: Activation::Relu,
            w1: Matrix::from_vec(2, 1, vec![-1.0, 2.0]).unwrap(),
            w: Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap(),
        };
        let h = encode(&p, &g).unwrap();
        assert_eq!(h.as_slice(), &[0.0, 1.0, 2.0, 0.0]);
    }

    #[test]
    fn single_edge_normalized_adjacency() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let a = NormalizedAdjacency::<f64>::new(&g).to_dense();
        for x in a.as_slice() {
            assert!((x - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn gcn_matches_dense_oracle() {
        let (g, _) = crate::synth::generate_synthetic(&crate::synth::SynthSpec {
            num_cliques: 4,
            clique_size: 5,
            noise_edges: 6,
            ..crate::synth::default_spec(crate::synth::SynthKind::Ring)
        })
        .unwrap();
        for act in [Activation::Relu, Activation::Softplus] {
            let p = init_params::<f64>(g.num_nodes(), EncoderKind::Gcn, act, 6, 3, 2).unwrap();
            let h = encode(&p, &g).unwrap();
            // dense oracle built straight from the definition
            let n = g.num_nodes();
            let deg: Vec<f64> = (0..n).map(|v| g.degree(v) as f64 + 1.0).collect();
            let a = Matrix::<f64>::from_fn(n, n, |u, v| {
                if u == v || g.has_edge(u, v) {
                    1.0 / (deg[u] * deg[v]).sqrt()
                } else {
                    0.0
                }
            });
            for u in 0..n {
                for v in 0..n {
                    assert_eq!(a[(u, v)], a[(v, u)]);
                }
            }
            let want = a.matmul(&p.w1).matmul(&p.w).map(|x| act.apply(x));
            for (x, y) in h.as_slice().iter().zip(want.as_slice()) {
                assert!((x - y).abs() < 1e-9);
            }
            assert!(h.min() >= 0.0);
        }
    }

    #[test]
    fn likelihood_values() {
        let zero = Matrix::<f64>::zeros(2, 3);
        assert_eq!(edge_likelihood(&zero, 0, 1), 0.5);
        let ones = Matrix::<f64>::from_fn(2, 4, |_, _| 1.0);
        assert!((edge_likelihood(&ones, 0, 1) - 0.98201).abs() < 1e-5);
    }

    #[test]
    fn embedding_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let h = Matrix::<f32>::from_fn(3, 2, |r, c| r as f32 * 0.1 + c as f32 / 3.0);
        let t = dir.path().join("h.txt");
        let b = dir.path().join("h.bin");
        write_embedding_text(&h, &t).unwrap();
        write_embedding_binary(&h, &b).unwrap();
        assert_eq!(read_embedding_text::<f32>(&t).unwrap(), h);
        assert_eq!(read_embedding_binary::<f32>(&b).unwrap(), h);
        assert_eq!(fs::metadata(&b).unwrap().len(), 8 + 4 * 6);
        assert!(fs::read_to_string(&t).unwrap().starts_with("3 2\n"));
    }

    proptest::proptest! {
        #[test]
        fn encoder_output_non_negative(seed in 0u64..200, softplus in proptest::bool::ANY) {
            let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
            let act = if softplus { Activation::Softplus } else { Activation::Relu };
            for kind in [EncoderKind::Fc, EncoderKind::Gcn] {
                let p = init_params::<f32>(6, kind, act, 5, 4, seed).unwrap();
                proptest::prop_assert!(encode(&p, &g).unwrap().min() >= 0.0);
            }
        }
    }
}
