//! Attention-based recurrent path decoder with per-token binary heads.
//!
//! For a prefix path the decoder runs one GRU step per consumed label
//! (a learned start symbol first, then the prefix labels), attending over the
//! encoder context with the previous hidden state as query. The final state
//! feeds one 2×H head per output token whose binary softmax gives the
//! probability that the token extends the path.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::gru::{GruCell, GruStepCache};
use super::params::{matvec, matvec_t, outer_acc, sigmoid, ParamVec, ParamVecBuilder};
use super::NeuralError;
use crate::poset::Label;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecoderConfig {
    pub labels: Vec<Label>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub context_dim: usize,
}

impl DecoderConfig {
    pub fn new(
        labels: impl IntoIterator<Item = Label>,
        embed_dim: usize,
        hidden_dim: usize,
        context_dim: usize,
    ) -> Self {
        let mut labels: Vec<Label> = labels.into_iter().collect();
        labels.sort();
        labels.dedup();
        DecoderConfig { labels, embed_dim, hidden_dim, context_dim }
    }
}

#[derive(Clone, Debug)]
pub struct DecoderParams {
    cfg: DecoderConfig,
    index: BTreeMap<Label, usize>,
    cell: GruCell,
    pub params: ParamVec,
}

/// ln(1 + e^x) computed without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl DecoderParams {
    pub fn new(cfg: DecoderConfig) -> Self {
        let v = cfg.labels.len();
        let mut builder = ParamVecBuilder::new();
        builder.add("embed", &[v, cfg.embed_dim]);
        builder.add("start", &[cfg.embed_dim]);
        builder.add("init_w", &[cfg.hidden_dim, cfg.context_dim]);
        builder.add("init_b", &[cfg.hidden_dim]);
        builder.add("attn_w", &[cfg.hidden_dim, cfg.context_dim]);
        let cell =
            GruCell::new("cell", cfg.embed_dim + cfg.context_dim, cfg.hidden_dim);
        cell.declare(&mut builder);
        builder.add("heads", &[v, 2, cfg.hidden_dim]);
        let params = builder.finish();
        let index = cfg.labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        DecoderParams { cfg, index, cell, params }
    }

    pub fn cfg(&self) -> &DecoderConfig {
        &self.cfg
    }

    pub fn label_index(&self, label: &Label) -> Result<usize, NeuralError> {
        self.index.get(label).copied().ok_or_else(|| NeuralError::UnknownLabel(label.clone()))
    }

    pub fn vocab_len(&self) -> usize {
        self.cfg.labels.len()
    }
}

struct StepCache {
    h_prev: Vec<f64>,
    alpha: Vec<f64>,
    embed_idx: Option<usize>,
    cell: GruStepCache,
    dropout_mask: Option<Vec<f64>>,
}

pub struct PrefixCache {
    steps: Vec<StepCache>,
    pub h_final: Vec<f64>,
}

/// Per-example decoding workspace: holds the shared encoder context, its
/// attention projection, and the gradient accumulators that are flushed once
/// per example.
pub struct ExamplePass<'a> {
    dec: &'a DecoderParams,
    context: &'a [Vec<f64>],
    summary: &'a [f64],
    projected: Vec<Vec<f64>>,
    h0: Vec<f64>,
    // accumulators
    dcontext: Vec<Vec<f64>>,
    dprojected: Vec<Vec<f64>>,
    dh0: Vec<f64>,
}

impl<'a> ExamplePass<'a> {
    pub fn new(dec: &'a DecoderParams, context: &'a [Vec<f64>], summary: &'a [f64]) -> Self {
        let h = dec.cfg.hidden_dim;
        let c = dec.cfg.context_dim;
        debug_assert_eq!(summary.len(), c);
        let attn_w = dec.params.block("attn_w");
        let projected: Vec<Vec<f64>> = context
            .iter()
            .map(|ctx_i| {
                let mut p = vec![0.0; h];
                matvec(attn_w, h, c, ctx_i, &mut p);
                p
            })
            .collect();
        let mut a0 = dec.params.block("init_b").to_vec();
        matvec(dec.params.block("init_w"), h, c, summary, &mut a0);
        let h0: Vec<f64> = a0.iter().map(|v| v.tanh()).collect();
        ExamplePass {
            dec,
            context,
            summary,
            projected,
            h0,
            dcontext: vec![vec![0.0; c]; context.len()],
            dprojected: vec![vec![0.0; h]; context.len()],
            dh0: vec![0.0; h],
        }
    }

    fn attention(&self, h_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let scores: Vec<f64> = self
            .projected
            .iter()
            .map(|p| p.iter().zip(h_prev).map(|(a, b)| a * b).sum())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let alpha: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut ctx_vec = vec![0.0; self.dec.cfg.context_dim];
        for (a, ctx_i) in alpha.iter().zip(self.context) {
            for (acc, v) in ctx_vec.iter_mut().zip(ctx_i) {
                *acc += a * v;
            }
        }
        (ctx_vec, alpha)
    }

    /// Runs the decoder along a prefix (one step per consumed symbol: the
    /// start symbol, then each prefix label). `dropout` applies an inverted
    /// mask to the cell input, sampled through `mask_source`.
    pub fn forward_prefix(
        &self,
        prefix: &[usize],
        mut mask_source: Option<&mut dyn FnMut(usize) -> Vec<f64>>,
    ) -> PrefixCache {
        let e = self.dec.cfg.embed_dim;
        let embed = self.dec.params.block("embed");
        let mut h = self.h0.clone();
        let mut steps = Vec::with_capacity(prefix.len() + 1);
        for t in 0..=prefix.len() {
            let (embed_idx, symbol): (Option<usize>, &[f64]) = if t == 0 {
                (None, self.dec.params.block("start"))
            } else {
                let idx = prefix[t - 1];
                (Some(idx), &embed[idx * e..(idx + 1) * e])
            };
            let (ctx_vec, alpha) = self.attention(&h);
            let mut x: Vec<f64> = symbol.iter().chain(ctx_vec.iter()).copied().collect();
            let dropout_mask = mask_source.as_mut().map(|f| f(x.len()));
            if let Some(mask) = &dropout_mask {
                for (xi, mi) in x.iter_mut().zip(mask) {
                    *xi *= mi;
                }
            }
            let (h_new, cell) = self.dec.cell.forward(&self.dec.params, &x, &h);
            steps.push(StepCache { h_prev: h, alpha, embed_idx, cell, dropout_mask });
            h = h_new;
        }
        PrefixCache { steps, h_final: h }
    }

    /// Positive-class probability per output token from the binary heads.
    pub fn head_probs(&self, h_final: &[f64]) -> Vec<f64> {
        let hd = self.dec.cfg.hidden_dim;
        let heads = self.dec.params.block("heads");
        (0..self.dec.vocab_len())
            .map(|w| {
                let base = w * 2 * hd;
                let pos = &heads[base..base + hd];
                let neg = &heads[base + hd..base + 2 * hd];
                let a: f64 = pos.iter().zip(h_final).map(|(p, h)| p * h).sum();
                let b: f64 = neg.iter().zip(h_final).map(|(p, h)| p * h).sum();
                sigmoid(a - b)
            })
            .collect()
    }

    /// Binary cross-entropy over every output token for one prefix:
    /// positive targets contribute −ln P(+), all other tokens −ln P(−).
    /// Accumulates head gradients and returns (loss, d h_final).
    /// `keep_negative` can drop a negative token from the objective
    /// (negative downsampling); positives are always kept.
    pub fn prefix_loss(
        &self,
        h_final: &[f64],
        positives: &BTreeSet<usize>,
        grads: Option<&mut ParamVec>,
        mut keep_negative: Option<&mut dyn FnMut(usize) -> bool>,
    ) -> (f64, Vec<f64>) {
        let hd = self.dec.cfg.hidden_dim;
        let heads = self.dec.params.block("heads");
        let mut loss = 0.0;
        let mut dh = vec![0.0; hd];
        let mut head_grads: Option<&mut ParamVec> = grads;
        for w in 0..self.dec.vocab_len() {
            let positive = positives.contains(&w);
            if !positive {
                if let Some(keep) = keep_negative.as_mut() {
                    if !keep(w) {
                        continue;
                    }
                }
            }
            let base = w * 2 * hd;
            let pos = &heads[base..base + hd];
            let neg = &heads[base + hd..base + 2 * hd];
            let a: f64 = pos.iter().zip(h_final).map(|(p, h)| p * h).sum();
            let b: f64 = neg.iter().zip(h_final).map(|(p, h)| p * h).sum();
            // −ln P(+) = softplus(b−a); −ln P(−) = softplus(a−b).
            let p = sigmoid(a - b);
            let y = if positive { 1.0 } else { 0.0 };
            loss += if positive { softplus(b - a) } else { softplus(a - b) };
            let d = p - y;
            if let Some(g) = head_grads.as_mut() {
                let hg = g.block_mut("heads");
                for i in 0..hd {
                    hg[base + i] += d * h_final[i];
                    hg[base + hd + i] -= d * h_final[i];
                }
            }
            for i in 0..hd {
                dh[i] += d * (pos[i] - neg[i]);
            }
        }
        (loss, dh)
    }

    /// Backpropagates through one prefix run, accumulating parameter
    /// gradients and the example-level context/summary accumulators.
    pub fn backward_prefix(
        &mut self,
        cache: &PrefixCache,
        dh_final: Vec<f64>,
        grads: &mut ParamVec,
    ) {
        let e = self.dec.cfg.embed_dim;
        let c = self.dec.cfg.context_dim;
        let mut dh = dh_final;
        for step in cache.steps.iter().rev() {
            let (mut dx, mut dh_prev) =
                self.dec.cell.backward(&self.dec.params, grads, &step.cell, &dh);
            if let Some(mask) = &step.dropout_mask {
                for (dxi, mi) in dx.iter_mut().zip(mask) {
                    *dxi *= mi;
                }
            }
            // Symbol part of the input.
            match step.embed_idx {
                Some(idx) => {
                    let embed_grad = grads.block_mut("embed");
                    for i in 0..e {
                        embed_grad[idx * e + i] += dx[i];
                    }
                }
                None => {
                    let start_grad = grads.block_mut("start");
                    for i in 0..e {
                        start_grad[i] += dx[i];
                    }
                }
            }
            // Attention part: dx[e..] is the gradient of the mixed context.
            let dctx_vec = &dx[e..];
            let alpha = &step.alpha;
            let mut dalpha = vec![0.0; alpha.len()];
            for (i, ctx_i) in self.context.iter().enumerate() {
                dalpha[i] = ctx_i.iter().zip(dctx_vec).map(|(v, d)| v * d).sum();
                for j in 0..c {
                    self.dcontext[i][j] += alpha[i] * dctx_vec[j];
                }
            }
            let dot: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
            for i in 0..alpha.len() {
                let dscore = alpha[i] * (dalpha[i] - dot);
                for j in 0..self.dec.cfg.hidden_dim {
                    dh_prev[j] += dscore * self.projected[i][j];
                    self.dprojected[i][j] += dscore * step.h_prev[j];
                }
            }
            dh = dh_prev;
        }
        for (a, b) in self.dh0.iter_mut().zip(&dh) {
            *a += b;
        }
    }

    /// Flushes the example-level accumulators: attention projection and
    /// initial-state projection gradients. Returns (dcontext, dsummary) for
    /// the encoder backward pass.
    pub fn finish(self, grads: &mut ParamVec) -> (Vec<Vec<f64>>, Vec<f64>) {
        let h = self.dec.cfg.hidden_dim;
        let c = self.dec.cfg.context_dim;
        let ExamplePass { dec, context, summary, h0, mut dcontext, dprojected, dh0, .. } = self;

        {
            let attn_grad = grads.block_mut("attn_w");
            for (dproj_i, ctx_i) in dprojected.iter().zip(context) {
                outer_acc(attn_grad, h, c, dproj_i, ctx_i);
            }
        }
        let attn_w = dec.params.block("attn_w");
        for (dctx_i, dproj_i) in dcontext.iter_mut().zip(&dprojected) {
            matvec_t(attn_w, h, c, dproj_i, dctx_i);
        }

        // h0 = tanh(init_w · summary + init_b)
        let da0: Vec<f64> = dh0.iter().zip(&h0).map(|(d, v)| d * (1.0 - v * v)).collect();
        outer_acc(grads.block_mut("init_w"), h, c, &da0, summary);
        for (g, d) in grads.block_mut("init_b").iter_mut().zip(&da0) {
            *g += d;
        }
        let mut dsummary = vec![0.0; c];
        matvec_t(dec.params.block("init_w"), h, c, &da0, &mut dsummary);

        (dcontext, dsummary)
    }

    /// Probability map over labels for a prefix given as labels.
    pub fn next_label_probs(&self, prefix: &[Label]) -> Result<BTreeMap<Label, f64>, NeuralError> {
        let indices = prefix
            .iter()
            .map(|l| self.dec.label_index(l))
            .collect::<Result<Vec<_>, _>>()?;
        let cache = self.forward_prefix(&indices, None);
        let probs = self.head_probs(&cache.h_final);
        Ok(self
            .dec
            .cfg
            .labels
            .iter()
            .cloned()
            .zip(probs)
            .collect())
    }

    /// Attention weights for one probe step (testing hook).
    pub fn probe_attention(&self) -> Vec<f64> {
        self.attention(&self.h0).1
    }
}
