//! Pre-norm transformer encoder with learned positions and a tied LM head.
//!
//! ```text
//! x0 = drop(E[ids] + P[pos])
//! h  = x + drop(Attn(LN1(x)))          per block
//! y  = h + drop(FF(LN2(h)))
//! hidden = LN_f(y_last)
//! logits = hidden · Eᵀ + out_bias
//! ```
//!
//! Every forward call records the activations needed by the matching
//! backward call in a [`SeqCache`]. Sequences are processed one at a time;
//! padding is removed before attention, so pad positions can never be
//! attended to.

use rand::Rng as _;

use super::config::ModelConfig;
use super::linalg::{self, matmul, matmul_a_bt, matmul_at_b_acc};
use super::loss::{self, LmLoss};
use super::params::Parameters;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::textcore::{INS, PAD};

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F = f32> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn new<R: rand::Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Linear {
            weight: Tensor::randn(&[d_in, d_out], INIT_STD, rng),
            bias: Tensor::zeros(&[d_out]),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &[F], rows: usize) -> Vec<F> {
        let mut out = vec![F::zero(); rows * self.d_out()];
        matmul(x, self.weight.data(), &mut out, rows, self.d_in(), self.d_out());
        linalg::add_bias(&mut out, self.bias.data());
        out
    }

    /// Accumulates parameter gradients into `grad` and returns `dx`.
    pub fn backward(&self, x: &[F], dy: &[F], rows: usize, grad: &mut Linear<F>) -> Vec<F> {
        let (d_in, d_out) = (self.d_in(), self.d_out());
        matmul_at_b_acc(x, dy, grad.weight.data_mut(), rows, d_in, d_out);
        linalg::sum_rows_acc(dy, grad.bias.data_mut());
        let mut dx = vec![F::zero(); rows * d_in];
        matmul_a_bt(dy, self.weight.data(), &mut dx, rows, d_out, d_in);
        dx
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Linear {
            weight: Tensor::zeros(self.weight.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    pub(crate) fn cast<G: Scalar>(&self) -> Linear<G> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<F = f32> {
    pub gain: Tensor<F>,
    pub bias: Tensor<F>,
}

#[derive(Debug, Clone)]
struct LnCache<F> {
    xhat: Vec<F>,
    inv_std: Vec<F>,
}

impl<F: Scalar> LayerNorm<F> {
    fn new(d: usize) -> Self {
        LayerNorm {
            gain: Tensor::filled(&[d], F::one()),
            bias: Tensor::zeros(&[d]),
        }
    }

    fn forward(&self, x: &[F]) -> (Vec<F>, LnCache<F>) {
        let d = self.gain.len();
        let rows = x.len() / d;
        let eps = F::from_f64c(LN_EPS);
        let inv_d = F::one() / F::from_usize(d).unwrap();
        let mut y = vec![F::zero(); x.len()];
        let mut xhat = vec![F::zero(); x.len()];
        let mut inv_std = vec![F::zero(); rows];
        for r in 0..rows {
            let xr = &x[r * d..(r + 1) * d];
            let mean = xr.iter().copied().sum::<F>() * inv_d;
            let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
            let inv = F::one() / (var + eps).sqrt();
            inv_std[r] = inv;
            for c in 0..d {
                let h = (xr[c] - mean) * inv;
                xhat[r * d + c] = h;
                y[r * d + c] = self.gain.data()[c] * h + self.bias.data()[c];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    fn backward(&self, cache: &LnCache<F>, dy: &[F], grad: &mut LayerNorm<F>) -> Vec<F> {
        let d = self.gain.len();
        let rows = cache.inv_std.len();
        let inv_d = F::one() / F::from_usize(d).unwrap();
        let mut dx = vec![F::zero(); dy.len()];
        let mut dxhat = vec![F::zero(); d];
        for r in 0..rows {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            let dyr = &dy[r * d..(r + 1) * d];
            let mut mean_dxhat = F::zero();
            let mut mean_dxhat_xhat = F::zero();
            for c in 0..d {
                grad.gain.data_mut()[c] += dyr[c] * xh[c];
                grad.bias.data_mut()[c] += dyr[c];
                dxhat[c] = dyr[c] * self.gain.data()[c];
                mean_dxhat += dxhat[c];
                mean_dxhat_xhat += dxhat[c] * xh[c];
            }
            mean_dxhat *= inv_d;
            mean_dxhat_xhat *= inv_d;
            let inv = cache.inv_std[r];
            for c in 0..d {
                dx[r * d + c] = inv * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
            }
        }
        dx
    }

    fn zeros_like(&self) -> Self {
        LayerNorm {
            gain: Tensor::zeros(self.gain.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    fn cast<G: Scalar>(&self) -> LayerNorm<G> {
        LayerNorm {
            gain: self.gain.cast(),
            bias: self.bias.cast(),
        }
    }
}

/// One pre-norm encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<F = f32> {
    pub ln1: LayerNorm<F>,
    pub q: Linear<F>,
    pub k: Linear<F>,
    pub v: Linear<F>,
    pub o: Linear<F>,
    pub ln2: LayerNorm<F>,
    pub ff1: Linear<F>,
    pub ff2: Linear<F>,
}

#[derive(Debug, Clone)]
struct BlockCache<F> {
    ln1: LnCache<F>,
    a: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    probs: Vec<F>,
    ctx: Vec<F>,
    drop_attn: Option<Vec<F>>,
    ln2: LnCache<F>,
    f: Vec<F>,
    pre: Vec<F>,
    act: Vec<F>,
    drop_ff: Option<Vec<F>>,
}

impl<F: Scalar> Block<F> {
    fn new<R: rand::Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let d = cfg.d_model;
        Block {
            ln1: LayerNorm::new(d),
            q: Linear::new(d, d, rng),
            k: Linear::new(d, d, rng),
            v: Linear::new(d, d, rng),
            o: Linear::new(d, d, rng),
            ln2: LayerNorm::new(d),
            ff1: Linear::new(d, cfg.d_ff, rng),
            ff2: Linear::new(cfg.d_ff, d, rng),
        }
    }

    fn named_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        out.push((format!("{prefix}.ln1.gain"), &self.ln1.gain));
        out.push((format!("{prefix}.ln1.bias"), &self.ln1.bias));
        for (name, lin) in [("attn.q", &self.q), ("attn.k", &self.k), ("attn.v", &self.v), ("attn.o", &self.o)] {
            out.push((format!("{prefix}.{name}.weight"), &lin.weight));
            out.push((format!("{prefix}.{name}.bias"), &lin.bias));
        }
        out.push((format!("{prefix}.ln2.gain"), &self.ln2.gain));
        out.push((format!("{prefix}.ln2.bias"), &self.ln2.bias));
        out.push((format!("{prefix}.ff1.weight"), &self.ff1.weight));
        out.push((format!("{prefix}.ff1.bias"), &self.ff1.bias));
        out.push((format!("{prefix}.ff2.weight"), &self.ff2.weight));
        out.push((format!("{prefix}.ff2.bias"), &self.ff2.bias));
    }

    fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<F>>) {
        out.push(&mut self.ln1.gain);
        out.push(&mut self.ln1.bias);
        for lin in [&mut self.q, &mut self.k, &mut self.v, &mut self.o] {
            out.push(&mut lin.weight);
            out.push(&mut lin.bias);
        }
        out.push(&mut self.ln2.gain);
        out.push(&mut self.ln2.bias);
        out.push(&mut self.ff1.weight);
        out.push(&mut self.ff1.bias);
        out.push(&mut self.ff2.weight);
        out.push(&mut self.ff2.bias);
    }

    fn zeros_like(&self) -> Self {
        Block {
            ln1: self.ln1.zeros_like(),
            q: self.q.zeros_like(),
            k: self.k.zeros_like(),
            v: self.v.zeros_like(),
            o: self.o.zeros_like(),
            ln2: self.ln2.zeros_like(),
            ff1: self.ff1.zeros_like(),
            ff2: self.ff2.zeros_like(),
        }
    }

    fn cast<G: Scalar>(&self) -> Block<G> {
        Block {
            ln1: self.ln1.cast(),
            q: self.q.cast(),
            k: self.k.cast(),
            v: self.v.cast(),
            o: self.o.cast(),
            ln2: self.ln2.cast(),
            ff1: self.ff1.cast(),
            ff2: self.ff2.cast(),
        }
    }

    fn forward(&self, x: &mut [F], n: usize, heads: usize, p_drop: F, mut rng: Option<&mut Rng>) -> BlockCache<F> {
        let d = self.q.d_in();
        let (a, ln1) = self.ln1.forward(x);
        let q = self.q.forward(&a, n);
        let k = self.k.forward(&a, n);
        let v = self.v.forward(&a, n);
        let (ctx, probs) = attention(&q, &k, &v, n, d, heads);
        let mut attn_out = self.o.forward(&ctx, n);
        let drop_attn = dropout(&mut attn_out, p_drop, rng.as_deref_mut());
        linalg::add_assign(x, &attn_out);

        let (f, ln2) = self.ln2.forward(x);
        let pre = self.ff1.forward(&f, n);
        let act: Vec<F> = pre.iter().map(|&z| gelu(z)).collect();
        let mut ff_out = self.ff2.forward(&act, n);
        let drop_ff = dropout(&mut ff_out, p_drop, rng);
        linalg::add_assign(x, &ff_out);

        BlockCache {
            ln1,
            a,
            q,
            k,
            v,
            probs,
            ctx,
            drop_attn,
            ln2,
            f,
            pre,
            act,
            drop_ff,
        }
    }

    /// `dx` holds the gradient w.r.t. the block output on entry and the
    /// gradient w.r.t. the block input on exit.
    fn backward(&self, c: &BlockCache<F>, dx: &mut [F], n: usize, heads: usize, g: &mut Block<F>) {
        let d = self.q.d_in();
        let mut d_ff_out = dx.to_vec();
        apply_mask(&mut d_ff_out, c.drop_ff.as_deref());
        let mut d_act = self.ff2.backward(&c.act, &d_ff_out, n, &mut g.ff2);
        for (da, &z) in d_act.iter_mut().zip(&c.pre) {
            *da *= gelu_grad(z);
        }
        let d_f = self.ff1.backward(&c.f, &d_act, n, &mut g.ff1);
        let d_h = self.ln2.backward(&c.ln2, &d_f, &mut g.ln2);
        linalg::add_assign(dx, &d_h);

        let mut d_attn_out = dx.to_vec();
        apply_mask(&mut d_attn_out, c.drop_attn.as_deref());
        let d_ctx = self.o.backward(&c.ctx, &d_attn_out, n, &mut g.o);
        let (dq, dk, dv) = attention_backward(&c.q, &c.k, &c.v, &c.probs, &d_ctx, n, d, heads);
        let mut d_a = self.q.backward(&c.a, &dq, n, &mut g.q);
        linalg::add_assign(&mut d_a, &self.k.backward(&c.a, &dk, n, &mut g.k));
        linalg::add_assign(&mut d_a, &self.v.backward(&c.a, &dv, n, &mut g.v));
        let d_x = self.ln1.backward(&c.ln1, &d_a, &mut g.ln1);
        linalg::add_assign(dx, &d_x);
    }
}

/// Multi-head scaled dot-product self-attention over `n` positions.
/// Returns the concatenated head outputs and the per-head probability
/// matrices laid out as `[heads × n × n]`.
fn attention<F: Scalar>(q: &[F], k: &[F], v: &[F], n: usize, d: usize, heads: usize) -> (Vec<F>, Vec<F>) {
    let dh = d / heads;
    let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
    let mut probs = vec![F::zero(); heads * n * n];
    let mut ctx = vec![F::zero(); n * d];
    for h in 0..heads {
        let off = h * dh;
        let p = &mut probs[h * n * n..(h + 1) * n * n];
        for i in 0..n {
            let qi = &q[i * d + off..i * d + off + dh];
            let row = &mut p[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] = linalg::dot(qi, &k[j * d + off..j * d + off + dh]) * scale;
            }
            linalg::softmax_inplace(row);
            let out = &mut ctx[i * d + off..i * d + off + dh];
            for j in 0..n {
                let pij = row[j];
                for (o, &vv) in out.iter_mut().zip(&v[j * d + off..j * d + off + dh]) {
                    *o += pij * vv;
                }
            }
        }
    }
    (ctx, probs)
}

#[allow(clippy::too_many_arguments)]
fn attention_backward<F: Scalar>(
    q: &[F],
    k: &[F],
    v: &[F],
    probs: &[F],
    d_ctx: &[F],
    n: usize,
    d: usize,
    heads: usize,
) -> (Vec<F>, Vec<F>, Vec<F>) {
    let dh = d / heads;
    let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
    let mut dq = vec![F::zero(); n * d];
    let mut dk = vec![F::zero(); n * d];
    let mut dv = vec![F::zero(); n * d];
    let mut dp = vec![F::zero(); n];
    for h in 0..heads {
        let off = h * dh;
        let p = &probs[h * n * n..(h + 1) * n * n];
        for i in 0..n {
            let dci = &d_ctx[i * d + off..i * d + off + dh];
            let pi = &p[i * n..(i + 1) * n];
            let mut weighted = F::zero();
            for j in 0..n {
                dp[j] = linalg::dot(dci, &v[j * d + off..j * d + off + dh]);
                weighted += pi[j] * dp[j];
                for (dvv, &dc) in dv[j * d + off..j * d + off + dh].iter_mut().zip(dci) {
                    *dvv += pi[j] * dc;
                }
            }
            for j in 0..n {
                let ds = pi[j] * (dp[j] - weighted) * scale;
                if ds == F::zero() {
                    continue;
                }
                for c in 0..dh {
                    dq[i * d + off + c] += ds * k[j * d + off + c];
                    dk[j * d + off + c] += ds * q[i * d + off + c];
                }
            }
        }
    }
    (dq, dk, dv)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu<F: Scalar>(x: F) -> F {
    let c = F::from_f64c(GELU_C);
    let a = F::from_f64c(GELU_A);
    let half = F::from_f64c(0.5);
    half * x * (F::one() + (c * (x + a * x * x * x)).tanh())
}

fn gelu_grad<F: Scalar>(x: F) -> F {
    let c = F::from_f64c(GELU_C);
    let a = F::from_f64c(GELU_A);
    let half = F::from_f64c(0.5);
    let three = F::from_f64c(3.0);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * a * x * x)
}

/// Inverted dropout. Returns the scale mask when applied.
fn dropout<F: Scalar>(x: &mut [F], p: F, rng: Option<&mut Rng>) -> Option<Vec<F>> {
    let rng = rng?;
    if p <= F::zero() {
        return None;
    }
    let keep = F::one() / (F::one() - p);
    let p64 = p.to_f64().unwrap();
    let mask: Vec<F> = (0..x.len())
        .map(|_| if rng.random::<f64>() < p64 { F::zero() } else { keep })
        .collect();
    apply_mask(x, Some(&mask));
    Some(mask)
}

fn apply_mask<F: Scalar>(x: &mut [F], mask: Option<&[F]>) {
    if let Some(m) = mask {
        for (v, &s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

/// Activations of one sequence, consumed by [`EncoderModel::backward_sequence`].
#[derive(Debug, Clone)]
pub struct SeqCache<F> {
    ids: Vec<u32>,
    positions: Vec<usize>,
    drop_emb: Option<Vec<F>>,
    blocks: Vec<BlockCache<F>>,
    ln_f: LnCache<F>,
}

impl<F> SeqCache<F> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Padded `[batch × seq_len]` id matrix; `pad_mask[i]` is true at padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    pub ids: Vec<u32>,
    pub pad_mask: Vec<bool>,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl TokenBatch {
    pub fn from_sequences(seqs: &[Vec<u32>]) -> Self {
        let seq_len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let mut ids = vec![PAD; seqs.len() * seq_len];
        let mut pad_mask = vec![true; seqs.len() * seq_len];
        for (b, s) in seqs.iter().enumerate() {
            ids[b * seq_len..b * seq_len + s.len()].copy_from_slice(s);
            pad_mask[b * seq_len..b * seq_len + s.len()].fill(false);
        }
        TokenBatch {
            ids,
            pad_mask,
            batch_size: seqs.len(),
            seq_len,
        }
    }

    /// Non-pad ids of row `b` together with their positions.
    pub fn row(&self, b: usize) -> (Vec<u32>, Vec<usize>) {
        let mut ids = Vec::new();
        let mut pos = Vec::new();
        for t in 0..self.seq_len {
            let i = b * self.seq_len + t;
            if !self.pad_mask[i] {
                ids.push(self.ids[i]);
                pos.push(t);
            }
        }
        (ids, pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel<F = f32> {
    pub config: ModelConfig,
    pub tok_emb: Tensor<F>,
    pub pos_emb: Tensor<F>,
    pub blocks: Vec<Block<F>>,
    pub ln_f: LayerNorm<F>,
    pub out_bias: Tensor<F>,
}

impl<F: Scalar> EncoderModel<F> {
    /// Weights ~ N(0, 0.02²), layer-norm gains 1, all biases 0.
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let tok_emb = Tensor::randn(&[config.vocab_size, d], INIT_STD, rng);
        let pos_emb = Tensor::randn(&[config.max_len, d], INIT_STD, rng);
        let blocks = (0..config.n_layers).map(|_| Block::new(&config, rng)).collect();
        Ok(EncoderModel {
            config,
            tok_emb,
            pos_emb,
            blocks,
            ln_f: LayerNorm::new(d),
            out_bias: Tensor::zeros(&[config.vocab_size]),
        })
    }

    pub fn cast<G: Scalar>(&self) -> EncoderModel<G> {
        EncoderModel {
            config: self.config,
            tok_emb: self.tok_emb.cast(),
            pos_emb: self.pos_emb.cast(),
            blocks: self.blocks.iter().map(Block::cast).collect(),
            ln_f: self.ln_f.cast(),
            out_bias: self.out_bias.cast(),
        }
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    /// Input-embedding row of the INS token.
    pub fn ins_embedding(&self) -> &[F] {
        self.tok_emb.row(INS as usize)
    }

    /// Encodes one unpadded sequence. `positions[i]` indexes the position
    /// embedding of `ids[i]`. Dropout is active iff `rng` is given.
    pub fn encode_sequence(
        &self,
        ids: &[u32],
        positions: &[usize],
        mut rng: Option<&mut Rng>,
    ) -> Result<(Vec<F>, SeqCache<F>)> {
        let cfg = &self.config;
        let n = ids.len();
        let d = cfg.d_model;
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(Error::UnknownId(bad));
        }
        if let Some(&p) = positions.iter().max() {
            if p >= cfg.max_len {
                return Err(Error::SequenceTooLong {
                    len: p + 1,
                    max_len: cfg.max_len,
                });
            }
        }
        let mut x = vec![F::zero(); n * d];
        for (i, (&id, &p)) in ids.iter().zip(positions).enumerate() {
            let row = &mut x[i * d..(i + 1) * d];
            for ((o, &e), &pe) in row.iter_mut().zip(self.tok_emb.row(id as usize)).zip(self.pos_emb.row(p)) {
                *o = e + pe;
            }
        }
        let p_drop = F::from_f64c(cfg.dropout as f64);
        let drop_emb = dropout(&mut x, p_drop, rng.as_deref_mut());
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            blocks.push(block.forward(&mut x, n, cfg.n_heads, p_drop, rng.as_deref_mut()));
        }
        let (hidden, ln_f) = self.ln_f.forward(&x);
        Ok((
            hidden,
            SeqCache {
                ids: ids.to_vec(),
                positions: positions.to_vec(),
                drop_emb,
                blocks,
                ln_f,
            },
        ))
    }

    /// Accumulates parameter gradients for one sequence given `dL/dhidden`.
    /// The INS input-embedding row never receives gradient.
    pub fn backward_sequence(&self, cache: &SeqCache<F>, d_hidden: &[F], grads: &mut Self) {
        let n = cache.ids.len();
        let d = self.config.d_model;
        let mut dx = self.ln_f.backward(&cache.ln_f, d_hidden, &mut grads.ln_f);
        for (l, block) in self.blocks.iter().enumerate().rev() {
            block.backward(&cache.blocks[l], &mut dx, n, self.config.n_heads, &mut grads.blocks[l]);
        }
        apply_mask(&mut dx, cache.drop_emb.as_deref());
        for (i, (&id, &p)) in cache.ids.iter().zip(&cache.positions).enumerate() {
            let g = &dx[i * d..(i + 1) * d];
            linalg::add_assign(grads.tok_emb.row_mut(id as usize), g);
            linalg::add_assign(grads.pos_emb.row_mut(p), g);
        }
        grads.freeze_ins_row();
    }

    pub(crate) fn freeze_ins_row(&mut self) {
        if (INS as usize) < self.config.vocab_size {
            self.tok_emb.row_mut(INS as usize).fill(F::zero());
        }
    }

    /// Tied LM projection of `n` hidden rows: `hidden · Eᵀ + out_bias`.
    pub fn project_sequence(&self, hidden: &[F]) -> Vec<F> {
        let d = self.config.d_model;
        let v = self.config.vocab_size;
        let n = hidden.len() / d;
        let mut logits = vec![F::zero(); n * v];
        matmul_a_bt(hidden, self.tok_emb.data(), &mut logits, n, d, v);
        linalg::add_bias(&mut logits, self.out_bias.data());
        logits
    }

    /// Backward of [`Self::project_sequence`]; returns `dL/dhidden`.
    pub fn project_backward(&self, hidden: &[F], d_logits: &[F], grads: &mut Self) -> Vec<F> {
        let d = self.config.d_model;
        let v = self.config.vocab_size;
        let n = hidden.len() / d;
        matmul_at_b_acc(d_logits, hidden, grads.tok_emb.data_mut(), n, v, d);
        linalg::sum_rows_acc(d_logits, grads.out_bias.data_mut());
        let mut dh = vec![F::zero(); n * d];
        matmul(d_logits, self.tok_emb.data(), &mut dh, n, v, d);
        dh
    }

    fn check_batch(&self, batch: &TokenBatch) -> Result<()> {
        if batch.seq_len > self.config.max_len {
            return Err(Error::SequenceTooLong {
                len: batch.seq_len,
                max_len: self.config.max_len,
            });
        }
        Ok(())
    }

    /// Hidden states `[B × T × d_model]`; padded positions are zero.
    pub fn forward(&self, batch: &TokenBatch) -> Result<Tensor<F>> {
        self.check_batch(batch)?;
        let d = self.config.d_model;
        let mut out = Tensor::zeros(&[batch.batch_size, batch.seq_len, d]);
        for b in 0..batch.batch_size {
            let (ids, pos) = batch.row(b);
            let (hidden, _) = self.encode_sequence(&ids, &pos, None)?;
            for (i, &t) in pos.iter().enumerate() {
                out.row_mut(b * batch.seq_len + t).copy_from_slice(&hidden[i * d..(i + 1) * d]);
            }
        }
        Ok(out)
    }

    /// LM logits `[.. × vocab_size]` for hidden states `[.. × d_model]`.
    pub fn lm_logits(&self, hidden: &Tensor<F>) -> Tensor<F> {
        let mut shape = hidden.shape().to_vec();
        *shape.last_mut().expect("rank >= 1") = self.config.vocab_size;
        Tensor::from_vec(&shape, self.project_sequence(hidden.data())).expect("shape")
    }

    /// Forward, masked cross-entropy and exact backward over a padded batch.
    /// `labels` and `predict_mask` are `[B × T]`. Dropout is active iff
    /// `rng` is given.
    pub fn backward(
        &self,
        batch: &TokenBatch,
        labels: &[u32],
        predict_mask: &[bool],
        mut rng: Option<&mut Rng>,
    ) -> Result<(LmLoss, Self)> {
        self.check_batch(batch)?;
        let n_cells = batch.batch_size * batch.seq_len;
        if labels.len() != n_cells || predict_mask.len() != n_cells {
            return Err(Error::LengthMismatch {
                expected: n_cells,
                actual: labels.len().min(predict_mask.len()),
            });
        }
        let n_pred = predict_mask
            .iter()
            .zip(&batch.pad_mask)
            .filter(|(&p, &pad)| p && !pad)
            .count();
        if n_pred == 0 {
            return Err(Error::NoPredictions);
        }
        let v = self.config.vocab_size;
        let inv_n = F::one() / F::from_usize(n_pred).unwrap();
        let mut grads = self.zeros_like();
        let mut stats = LmLoss::default();

        for b in 0..batch.batch_size {
            let (ids, pos) = batch.row(b);
            if ids.is_empty() {
                continue;
            }
            let (hidden, cache) = self.encode_sequence(&ids, &pos, rng.as_deref_mut())?;
            let mut logits = self.project_sequence(&hidden);
            let mut any = false;
            for (i, &t) in pos.iter().enumerate() {
                let cell = b * batch.seq_len + t;
                let row = &mut logits[i * v..(i + 1) * v];
                if !predict_mask[cell] {
                    row.fill(F::zero());
                    continue;
                }
                any = true;
                let label = labels[cell] as usize;
                if label >= v {
                    return Err(Error::UnknownId(labels[cell]));
                }
                let (nll, correct) = loss::cross_entropy_row(row, label);
                stats.add(nll.to_f64().unwrap(), correct);
                linalg::softmax_inplace(row);
                row[label] -= F::one();
                for g in row.iter_mut() {
                    *g *= inv_n;
                }
            }
            if !any {
                continue;
            }
            let d_hidden = self.project_backward(&hidden, &logits, &mut grads);
            self.backward_sequence(&cache, &d_hidden, &mut grads);
        }
        grads.freeze_ins_row();
        Ok((stats, grads))
    }

    /// Masked LM loss of a batch without gradients.
    pub fn evaluate(&self, batch: &TokenBatch, labels: &[u32], predict_mask: &[bool]) -> Result<LmLoss> {
        let hidden = self.forward(batch)?;
        let logits = self.lm_logits(&hidden);
        let mask: Vec<bool> = predict_mask
            .iter()
            .zip(&batch.pad_mask)
            .map(|(&p, &pad)| p && !pad)
            .collect();
        loss::lm_loss(&logits, labels, &mask)
    }
}

impl<F: Scalar> Parameters<F> for EncoderModel<F> {
    fn named_params(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = vec![
            ("tok_emb".to_string(), &self.tok_emb),
            ("pos_emb".to_string(), &self.pos_emb),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            b.named_params(&format!("blocks.{i}"), &mut out);
        }
        out.push(("ln_f.gain".to_string(), &self.ln_f.gain));
        out.push(("ln_f.bias".to_string(), &self.ln_f.bias));
        out.push(("out_bias".to_string(), &self.out_bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = vec![&mut self.tok_emb, &mut self.pos_emb];
        for b in &mut self.blocks {
            b.params_mut(&mut out);
        }
        out.push(&mut self.ln_f.gain);
        out.push(&mut self.ln_f.bias);
        out.push(&mut self.out_bias);
        out
    }

    fn zeros_like(&self) -> Self {
        EncoderModel {
            config: self.config,
            tok_emb: Tensor::zeros(self.tok_emb.shape()),
            pos_emb: Tensor::zeros(self.pos_emb.shape()),
            blocks: self.blocks.iter().map(Block::zeros_like).collect(),
            ln_f: self.ln_f.zeros_like(),
            out_bias: Tensor::zeros(self.out_bias.shape()),
        }
    }

    fn frozen_rows(&self) -> Vec<(usize, usize)> {
        if (INS as usize) < self.config.vocab_size {
            vec![(0, INS as usize)]
        } else {
            Vec::new()
        }
    }
}
