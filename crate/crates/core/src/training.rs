//! The training objective
//!
//! ```text
//! L = L_rw + λ_dis · L_dis + λ_ent · (1 − H_ent / log K)
//! ```
//!
//! * `L_rw`: skip-gram with negative sampling on walk co-occurrences.
//! * `L_dis`: sum of off-diagonal cosine similarities between the columns of
//!   the affiliation matrix, approximated column-wise as `F[:, d] = S_d · H[:, d]`
//!   with `S_d = Σ_u H[u, d]`.
//! * `H_ent`: entropy of the normalised column masses `p_d = S_d / Σ_l S_l`;
//!   the penalty keeps every dimension populated.
//!
//! Gradients are derived by hand and pushed back through the activation and
//! (for the convolutional encoder) through `Â`. Parameters are updated with
//! bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::{dot, Matrix};
use crate::model::{forward, init_params, Activation, EncoderKind, EncoderParams, Forward, NormalizedAdjacency};
use crate::sampling::{PairBatch, TrainingBatch, WalkConfig, WeightedPairs};
use crate::scalar::{sigmoid, Scalar};

const LOG_CLAMP: f64 = 1e-7;
const COS_EPS: f64 = 1e-12;
const MASS_EPS: f64 = 1e-12;

/// How the skip-gram terms are aggregated over the pair corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RwReduction {
    /// Mean over positives plus mean over negatives.
    Mean,
    /// Plain sums over both pair sets.
    #[default]
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda_ent: f64,
    pub lambda_dis: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Positive pairs per optimisation step; `None` means one full-corpus step per epoch.
    pub batch_size: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub reduction: RwReduction,
    pub seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_ent: 1.0,
            lambda_dis: 1.0,
            epochs: 50,
            learning_rate: 0.01,
            batch_size: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            reduction: RwReduction::Sum,
            seed: 0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_ent < 0.0 || self.lambda_dis < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Both regularisers off: plain skip-gram on the same encoder.
    pub fn is_baseline(&self) -> bool {
        self.lambda_dis == 0.0 && self.lambda_ent == 0.0
    }
}

#[inline]
fn clamped_log<T: Scalar>(p: T) -> (T, bool) {
    let lo = T::c(LOG_CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        (lo.ln(), true)
    } else if p > hi {
        (hi.ln(), true)
    } else {
        (p.ln(), false)
    }
}

fn pair_scale<T: Scalar>(pairs: &WeightedPairs, reduction: RwReduction) -> T {
    match reduction {
        RwReduction::Mean if pairs.count > 0 => T::one() / T::c(pairs.count as f64),
        _ => T::one(),
    }
}

/// Skip-gram loss; accumulates `∂L_rw/∂H` into `grad` when given.
fn rw_terms<T: Scalar>(
    h: &Matrix<T>,
    batch: &TrainingBatch,
    reduction: RwReduction,
    mut grad: Option<&mut Matrix<T>>,
) -> T {
    let mut total = T::zero();
    for (pairs, positive) in [(&batch.positives, true), (&batch.negatives, false)] {
        let scale: T = pair_scale(pairs, reduction);
        let mut part = T::zero();
        for (&(u, v), &w) in pairs.pairs.iter().zip(&pairs.weights) {
            let w = T::c(w);
            let s = dot(h.row(u), h.row(v));
            let sig = sigmoid(s);
            // positives: -log σ(s); negatives: -log σ(-s) = -log(1 - σ(s))
            let (log_p, clamped) = clamped_log(if positive { sig } else { T::one() - sig });
            part -= w * log_p;
            if let Some(g) = grad.as_deref_mut() {
                if clamped {
                    continue;
                }
                let ds = scale * w * if positive { sig - T::one() } else { sig };
                if u == v {
                    let row = h.row(u).to_vec();
                    for (gk, hk) in g.row_mut(u).iter_mut().zip(&row) {
                        *gk += ds * (*hk + *hk);
                    }
                } else {
                    for k in 0..h.cols() {
                        let (hu, hv) = (h[(u, k)], h[(v, k)]);
                        g[(u, k)] += ds * hv;
                        g[(v, k)] += ds * hu;
                    }
                }
            }
        }
        total += scale * part;
    }
    total
}

/// `−Σ_pos log σ(h(u)·h(v)) − Σ_neg log σ(−h(u′)·h(v))` with clamped logs.
pub fn loss_rw<T: Scalar>(h: &Matrix<T>, batch: &TrainingBatch, reduction: RwReduction) -> T {
    rw_terms(h, batch, reduction, None)
}

/// Column masses `S_d = Σ_u H[u, d]`.
pub fn affiliation_column_stats<T: Scalar>(h: &Matrix<T>) -> Vec<T> {
    h.column_sums()
}

/// Approximate affiliation matrix `F[:, d] = S_d · H[:, d]`.
pub fn approx_affiliation<T: Scalar>(h: &Matrix<T>) -> Matrix<T> {
    let s = affiliation_column_stats(h);
    Matrix::from_fn(h.rows(), h.cols(), |r, c| s[c] * h[(r, c)])
}

fn dis_terms<T: Scalar>(h: &Matrix<T>, grad: Option<(&mut Matrix<T>, T)>) -> T {
    let k = h.cols();
    if k < 2 {
        return T::zero();
    }
    let s = affiliation_column_stats(h);
    let f = approx_affiliation(h);
    let gram = f.t_matmul(&f);
    let norms: Vec<T> = (0..k).map(|d| gram[(d, d)].max(T::zero()).sqrt()).collect();
    let eps = T::c(COS_EPS);

    let mut loss = T::zero();
    // dF = F·A + F·diag(b)
    let mut a = Matrix::<T>::zeros(k, k);
    let mut b = vec![T::zero(); k];
    let two = T::c(2.0);
    for d in 0..k {
        for l in 0..k {
            if d == l {
                continue;
            }
            let nn = norms[d] * norms[l];
            if nn > eps {
                let c = gram[(d, l)] / nn;
                loss += c;
                a[(l, d)] += two / nn;
                b[d] -= two * c / (norms[d] * norms[d]);
            } else {
                loss += gram[(d, l)] / eps;
                a[(l, d)] += two / eps;
            }
        }
    }

    if let Some((g, weight)) = grad {
        let mut df = f.matmul(&a);
        for r in 0..df.rows() {
            for (x, (&fb, &bd)) in df.row_mut(r).iter_mut().zip(f.row(r).iter().zip(&b)) {
                *x += fb * bd;
            }
        }
        // F[u, d] = S_d H[u, d] and S_d = Σ_u H[u, d]
        let through_s: Vec<T> = (0..k)
            .map(|d| (0..h.rows()).map(|r| df[(r, d)] * h[(r, d)]).sum())
            .collect();
        for r in 0..h.rows() {
            for d in 0..k {
                g[(r, d)] += weight * (s[d] * df[(r, d)] + through_s[d]);
            }
        }
    }
    loss
}

/// `Σ_{d≠l} cos(F[:, d], F[:, l])` on the approximate affiliation matrix.
pub fn loss_dis<T: Scalar>(h: &Matrix<T>) -> T {
    dis_terms(h, None)
}

fn entropy_terms<T: Scalar>(h: &Matrix<T>, grad: Option<(&mut Matrix<T>, T)>) -> T {
    let k = h.cols();
    if k < 2 {
        return T::zero();
    }
    let s = affiliation_column_stats(h);
    let total: T = s.iter().copied().sum();
    if total <= T::c(MASS_EPS) {
        return T::one();
    }
    let log_k = T::c((k as f64).ln());
    let p: Vec<T> = s.iter().map(|&x| x / total).collect();
    let ent: T = p.iter().filter(|&&x| x > T::zero()).map(|&x| -x * x.ln()).sum();
    if let Some((g, weight)) = grad {
        let tiny = T::c(1e-30);
        for d in 0..k {
            let ds = (p[d].max(tiny).ln() + ent) / (total * log_k);
            for r in 0..h.rows() {
                g[(r, d)] += weight * ds;
            }
        }
    }
    T::one() - ent / log_k
}

/// `1 − H_ent / log K`, in `[0, 1]`; 1 when the embedding has no mass.
pub fn entropy_reg<T: Scalar>(h: &Matrix<T>) -> T {
    entropy_terms(h, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rw: f64,
    pub dis: f64,
    pub ent: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer<T> {
    pub dw1: Matrix<T>,
    pub dw: Matrix<T>,
}

/// `∂L/∂H` for the full objective, plus the loss parts.
pub fn loss_and_embedding_grad<T: Scalar>(
    h: &Matrix<T>,
    batch: &TrainingBatch,
    cfg: &LossConfig,
) -> (LossBreakdown, Matrix<T>) {
    let mut dh = Matrix::zeros(h.rows(), h.cols());
    let rw = rw_terms(h, batch, cfg.reduction, Some(&mut dh));
    let dis = if cfg.lambda_dis > 0.0 {
        dis_terms(h, Some((&mut dh, T::c(cfg.lambda_dis))))
    } else {
        loss_dis(h)
    };
    let ent = if cfg.lambda_ent > 0.0 {
        entropy_terms(h, Some((&mut dh, T::c(cfg.lambda_ent))))
    } else {
        entropy_reg(h)
    };
    let total = rw.f64() + cfg.lambda_dis * dis.f64() + cfg.lambda_ent * ent.f64();
    (
        LossBreakdown {
            rw: rw.f64(),
            dis: dis.f64(),
            ent: ent.f64(),
            total,
        },
        dh,
    )
}

/// Loss and parameter gradients for one step.
pub fn total_loss_and_grads<T: Scalar>(
    params: &EncoderParams<T>,
    adj: Option<&NormalizedAdjacency<T>>,
    batch: &TrainingBatch,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, GradBuffer<T>)> {
    let fwd = forward(params, adj)?;
    let (loss, dh) = loss_and_embedding_grad(&fwd.h, batch, cfg);
    if !loss.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss is {} (rw {}, dis {}, ent {})",
            loss.total, loss.rw, loss.dis, loss.ent
        )));
    }
    Ok((loss, backprop(params, adj, &fwd, &dh)))
}

fn backprop<T: Scalar>(
    params: &EncoderParams<T>,
    adj: Option<&NormalizedAdjacency<T>>,
    fwd: &Forward<T>,
    dh: &Matrix<T>,
) -> GradBuffer<T> {
    let act = params.activation;
    let mut dpre = dh.clone();
    for (g, &x) in dpre.as_mut_slice().iter_mut().zip(fwd.pre.as_slice()) {
        *g *= act.derivative(x);
    }
    let dw = fwd.z.t_matmul(&dpre);
    let dz = dpre.matmul_t(&params.w);
    let dw1 = match (params.kind, adj) {
        (EncoderKind::Gcn, Some(a)) => a.mul(&dz),
        _ => dz,
    };
    GradBuffer { dw1, dw }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u32,
    m_w1: Matrix<T>,
    v_w1: Matrix<T>,
    m_w: Matrix<T>,
    v_w: Matrix<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &EncoderParams<T>) -> Self {
        let (a, b) = params.w1.shape();
        let (c, d) = params.w.shape();
        AdamState {
            step: 0,
            m_w1: Matrix::zeros(a, b),
            v_w1: Matrix::zeros(a, b),
            m_w: Matrix::zeros(c, d),
            v_w: Matrix::zeros(c, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&LossConfig> for AdamHyper {
    fn from(c: &LossConfig) -> Self {
        AdamHyper {
            lr: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.adam_eps,
        }
    }
}

/// One bias-corrected Adam update applied to a single tensor.
pub fn adam_update<T: Scalar>(param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], step: u32, hp: &AdamHyper) {
    let (b1, b2) = (T::c(hp.beta1), T::c(hp.beta2));
    let c1 = T::one() - T::c(hp.beta1.powi(step as i32));
    let c2 = T::one() - T::c(hp.beta2.powi(step as i32));
    let lr = T::c(hp.lr);
    let eps = T::c(hp.eps);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

pub fn adam_step<T: Scalar>(params: &mut EncoderParams<T>, grads: &GradBuffer<T>, state: &mut AdamState<T>, hp: &AdamHyper) {
    state.step += 1;
    adam_update(
        params.w1.as_mut_slice(),
        grads.dw1.as_slice(),
        state.m_w1.as_mut_slice(),
        state.v_w1.as_mut_slice(),
        state.step,
        hp,
    );
    adam_update(
        params.w.as_mut_slice(),
        grads.dw.as_slice(),
        state.m_w.as_mut_slice(),
        state.v_w.as_mut_slice(),
        state.step,
        hp,
    );
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub activation: Activation,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderKind::Fc,
            activation: Activation::Relu,
            hidden_dim: 128,
            out_dim: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: EncoderParams<T>,
    pub embedding: Matrix<T>,
    /// Loss at each epoch (summed over the epoch's steps), measured before the update.
    pub trace: Vec<LossBreakdown>,
}

/// Generates the walk corpus once, then runs `epochs` passes of Adam over it.
pub fn train<T: Scalar>(g: &Graph, model: &ModelConfig, loss: &LossConfig, walk: &WalkConfig) -> Result<TrainOutcome<T>> {
    loss.validate()?;
    let corpus = PairBatch::from_graph(g, walk)?;
    if corpus.positives.is_empty() {
        return Err(Error::Degenerate("walk corpus has no co-occurring pairs".into()));
    }
    let batches: Vec<TrainingBatch> = match loss.batch_size {
        None => vec![corpus.aggregate()],
        Some(size) => corpus.chunks(size).iter().map(PairBatch::aggregate).collect(),
    };
    drop(corpus);

    let mut params = init_params::<T>(g.num_nodes(), model.encoder, model.activation, model.hidden_dim, model.out_dim, loss.seed)?;
    let adj = match model.encoder {
        EncoderKind::Gcn => Some(NormalizedAdjacency::new(g)),
        EncoderKind::Fc => None,
    };
    let mut state = AdamState::new(&params);
    let hp = AdamHyper::from(loss);
    let mut trace = Vec::with_capacity(loss.epochs);
    for epoch in 0..loss.epochs {
        let mut acc = LossBreakdown {
            rw: 0.0,
            dis: 0.0,
            ent: 0.0,
            total: 0.0,
        };
        for batch in &batches {
            let (l, grads) = total_loss_and_grads(&params, adj.as_ref(), batch, loss)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}: {e}")))?;
            acc.rw += l.rw;
            acc.dis += l.dis;
            acc.ent += l.ent;
            acc.total += l.total;
            adam_step(&mut params, &grads, &mut state, &hp);
        }
        log::debug!("epoch {epoch}: loss {:.6}", acc.total);
        trace.push(acc);
    }
    let embedding = forward(&params, adj.as_ref())?.h;
    Ok(TrainOutcome {
        params,
        embedding,
        trace,
    })
}
