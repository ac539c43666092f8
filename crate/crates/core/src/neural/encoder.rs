//! Bidirectional multi-layer GRU encoder over question tokens.
//!
//! Each layer runs one GRU left-to-right and one right-to-left; a token's
//! representation is the concatenation of both states, which also feeds the
//! next layer. The context matrix is the top layer's per-token output; the
//! summary state concatenates the two final states and seeds the decoder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gru::{GruCell, GruStepCache};
use super::params::{ParamVec, ParamVecBuilder};
use super::NeuralError;

/// Index 0 of the input vocabulary is reserved for unknown tokens.
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EncoderConfig {
    pub tokens: Vec<String>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
}

impl EncoderConfig {
    /// Input vocabulary from a token iterator, UNK first, rest sorted.
    pub fn with_vocab_from<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        embed_dim: usize,
        hidden_dim: usize,
        layers: usize,
    ) -> Self {
        let mut uniq: Vec<String> =
            tokens.into_iter().filter(|t| *t != UNK_TOKEN).map(String::from).collect();
        uniq.sort();
        uniq.dedup();
        let mut all = vec![UNK_TOKEN.to_string()];
        all.extend(uniq);
        EncoderConfig { tokens: all, embed_dim, hidden_dim, layers }
    }

    pub fn context_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

/// Encoder parameters: token embeddings plus forward/backward GRU cells per
/// layer.
#[derive(Clone, Debug)]
pub struct EncoderParams {
    cfg: EncoderConfig,
    index: BTreeMap<String, usize>,
    cells: Vec<(GruCell, GruCell)>,
    pub params: ParamVec,
}

pub struct EncodeResult {
    /// One vector of `2 * hidden_dim` per input token.
    pub context: Vec<Vec<f64>>,
    /// Concatenated final forward and backward states.
    pub summary: Vec<f64>,
    pub cache: EncodeCache,
}

pub struct EncodeCache {
    token_indices: Vec<usize>,
    /// Per layer: the input vectors fed to that layer.
    layer_inputs: Vec<Vec<Vec<f64>>>,
    fw_caches: Vec<Vec<GruStepCache>>,
    bw_caches: Vec<Vec<GruStepCache>>,
}

impl EncoderParams {
    pub fn new(cfg: EncoderConfig) -> Self {
        assert!(cfg.layers >= 1, "encoder needs at least one layer");
        let mut builder = ParamVecBuilder::new();
        builder.add("embed", &[cfg.tokens.len(), cfg.embed_dim]);
        let mut cells = Vec::new();
        for layer in 0..cfg.layers {
            let input_dim = if layer == 0 { cfg.embed_dim } else { cfg.context_dim() };
            let fw = GruCell::new(format!("l{layer}.fw"), input_dim, cfg.hidden_dim);
            let bw = GruCell::new(format!("l{layer}.bw"), input_dim, cfg.hidden_dim);
            fw.declare(&mut builder);
            bw.declare(&mut builder);
            cells.push((fw, bw));
        }
        let params = builder.finish();
        let index = cfg.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EncoderParams { cfg, index, cells, params }
    }

    pub fn cfg(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn token_index(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, tokens: &[String]) -> Result<EncodeResult, NeuralError> {
        if tokens.is_empty() {
            return Err(NeuralError::EmptyInput);
        }
        let t_len = tokens.len();
        let h = self.cfg.hidden_dim;
        let token_indices: Vec<usize> = tokens.iter().map(|t| self.token_index(t)).collect();

        let embed = self.params.block("embed");
        let mut inputs: Vec<Vec<f64>> = token_indices
            .iter()
            .map(|&idx| embed[idx * self.cfg.embed_dim..(idx + 1) * self.cfg.embed_dim].to_vec())
            .collect();

        let mut layer_inputs = Vec::with_capacity(self.cfg.layers);
        let mut fw_caches = Vec::with_capacity(self.cfg.layers);
        let mut bw_caches = Vec::with_capacity(self.cfg.layers);
        let mut outputs: Vec<Vec<f64>> = Vec::new();
        let mut summary = vec![0.0; 2 * h];

        for (fw, bw) in &self.cells {
            let mut fw_states: Vec<Vec<f64>> = Vec::with_capacity(t_len);
            let mut fw_cache: Vec<GruStepCache> = Vec::with_capacity(t_len);
            let mut state = vec![0.0; h];
            for x in &inputs {
                let (next, cache) = fw.forward(&self.params, x, &state);
                fw_cache.push(cache);
                fw_states.push(next.clone());
                state = next;
            }
            let fw_last = state;

            let mut bw_states: Vec<Vec<f64>> = vec![Vec::new(); t_len];
            let mut bw_cache: Vec<Option<GruStepCache>> = (0..t_len).map(|_| None).collect();
            let mut state = vec![0.0; h];
            for t in (0..t_len).rev() {
                let (next, cache) = bw.forward(&self.params, &inputs[t], &state);
                bw_cache[t] = Some(cache);
                bw_states[t] = next.clone();
                state = next;
            }
            let bw_last = state;

            outputs = (0..t_len)
                .map(|t| {
                    let mut v = fw_states[t].clone();
                    v.extend_from_slice(&bw_states[t]);
                    v
                })
                .collect();
            summary = fw_last.iter().chain(bw_last.iter()).copied().collect();

            layer_inputs.push(std::mem::replace(&mut inputs, outputs.clone()));
            fw_caches.push(fw_cache);
            bw_caches.push(bw_cache.into_iter().map(Option::unwrap).collect());
        }

        Ok(EncodeResult {
            context: outputs,
            summary,
            cache: EncodeCache { token_indices, layer_inputs, fw_caches, bw_caches },
        })
    }

    /// Backpropagates context and summary gradients into `grads`.
    pub fn backward(
        &self,
        cache: &EncodeCache,
        dcontext: &[Vec<f64>],
        dsummary: &[f64],
        grads: &mut ParamVec,
    ) {
        let t_len = cache.token_indices.len();
        let h = self.cfg.hidden_dim;
        debug_assert_eq!(dcontext.len(), t_len);

        // Top-layer output gradients: per-token context plus the summary on
        // the final states.
        let mut dout: Vec<Vec<f64>> = dcontext.to_vec();
        for i in 0..h {
            dout[t_len - 1][i] += dsummary[i];
            dout[0][h + i] += dsummary[h + i];
        }

        for layer in (0..self.cfg.layers).rev() {
            let (fw, bw) = &self.cells[layer];
            let input_dim = if layer == 0 { self.cfg.embed_dim } else { self.cfg.context_dim() };
            let mut dinputs: Vec<Vec<f64>> = vec![vec![0.0; input_dim]; t_len];

            // Forward direction: reverse time order.
            let mut dh = vec![0.0; h];
            for t in (0..t_len).rev() {
                for i in 0..h {
                    dh[i] += dout[t][i];
                }
                let (dx, dh_prev) =
                    fw.backward(&self.params, grads, &cache.fw_caches[layer][t], &dh);
                for (a, b) in dinputs[t].iter_mut().zip(&dx) {
                    *a += b;
                }
                dh = dh_prev;
            }

            // Backward direction processed T-1..0, so backprop runs 0..T-1.
            let mut dh = vec![0.0; h];
            for (t, dout_t) in dout.iter().enumerate() {
                for i in 0..h {
                    dh[i] += dout_t[h + i];
                }
                let (dx, dh_prev) =
                    bw.backward(&self.params, grads, &cache.bw_caches[layer][t], &dh);
                for (a, b) in dinputs[t].iter_mut().zip(&dx) {
                    *a += b;
                }
                dh = dh_prev;
            }

            dout = dinputs;
        }

        let embed_grad = grads.block_mut("embed");
        for (t, &idx) in cache.token_indices.iter().enumerate() {
            let row = &mut embed_grad[idx * self.cfg.embed_dim..(idx + 1) * self.cfg.embed_dim];
            for (g, d) in row.iter_mut().zip(&dout[t]) {
                *g += d;
            }
        }
        // layer_inputs kept alive for cache completeness.
        let _ = &cache.layer_inputs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_encoder() -> EncoderParams {
        let cfg = EncoderConfig::with_vocab_from(
            ["who", "influences", "gorky"],
            4,
            3,
            2,
        );
        EncoderParams::new(cfg)
    }

    #[test]
    fn context_has_one_vector_per_token_of_twice_hidden_dim() {
        let enc = small_encoder();
        let tokens: Vec<String> =
            ["who", "influences", "gorky", "who", "who", "gorky", "who"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        let result = enc.encode(&tokens).unwrap();
        assert_eq!(result.context.len(), 7);
        assert!(result.context.iter().all(|v| v.len() == 6));
        assert_eq!(result.summary.len(), 6);
    }

    #[test]
    fn encoding_is_deterministic() {
        let enc = small_encoder();
        let tokens: Vec<String> = ["who", "influences"].iter().map(|s| s.to_string()).collect();
        let a = enc.encode(&tokens).unwrap();
        let b = enc.encode(&tokens).unwrap();
        assert_eq!(a.context, b.context);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let enc = small_encoder();
        assert_eq!(enc.token_index("never-seen"), 0);
        let tokens: Vec<String> = ["never-seen"].iter().map(|s| s.to_string()).collect();
        enc.encode(&tokens).unwrap();
    }

    #[test]
    fn empty_input_is_an_error() {
        let enc = small_encoder();
        assert!(matches!(enc.encode(&[]), Err(NeuralError::EmptyInput)));
    }
}
