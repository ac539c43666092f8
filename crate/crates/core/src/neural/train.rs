//! Training of the poset decoder (Eq. 5 objective, corrected reading).
//!
//! The objective treats every (prefix path, vocabulary token) pair of every
//! training example as a binary classification: tokens that actually extend
//! the path are positive, all other tokens negative, and the loss is the sum
//! of −ln P(+) over positives and −ln P(−) over negatives. The paper's
//! printed product runs P(+) over all tokens including the absent ones,
//! which cannot be the intended likelihood; `training_pairs` documents the
//! reading implemented here and is pinned by a unit test.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::decoder::{DecoderConfig, DecoderParams, ExamplePass};
use super::encoder::{EncoderConfig, EncoderParams};
use super::params::ParamVec;
use super::{NeuralError, OptimizerKind, TrainConfig};
use crate::poset::{Label, SemanticPoset};

/// Trained encoder/decoder pair over a shared output vocabulary.
#[derive(Clone, Debug)]
pub struct SketchModel {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    /// Mean per-example loss evaluated on the full dataset after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// One example's supervision: the encoder tokens plus, per prefix path of the
/// target, the token indices that extend it.
pub(crate) struct PreparedExample {
    pub tokens: Vec<String>,
    pub prefixes: Vec<(Vec<usize>, BTreeSet<usize>)>,
}

/// The (prefix, token, is_positive) pairs the objective is built from.
/// Exposed so the objective's target construction can be pinned by tests.
pub fn training_pairs(
    target: &SemanticPoset,
) -> Result<Vec<(Vec<Label>, Label, bool)>, NeuralError> {
    let vocab: Vec<Label> = target.vocab().all_tokens().iter().cloned().collect();
    let mut pairs = Vec::new();
    for prefix in target.prefix_paths()? {
        let positives = target.next_labels(&prefix)?;
        for token in &vocab {
            pairs.push((
                prefix.label_seq().to_vec(),
                token.clone(),
                positives.contains(token),
            ));
        }
    }
    Ok(pairs)
}

pub(crate) fn prepare_example(
    decoder: &DecoderParams,
    tokens: &[String],
    target: &SemanticPoset,
) -> Result<PreparedExample, NeuralError> {
    let report = target.validate();
    if !report.ok {
        return Err(NeuralError::InvalidPoset(report));
    }
    let mut prefixes = Vec::new();
    for prefix in target.prefix_paths()? {
        let indices = prefix
            .label_seq()
            .iter()
            .map(|l| decoder.label_index(l))
            .collect::<Result<Vec<_>, _>>()?;
        let positives = target
            .next_labels(&prefix)?
            .iter()
            .map(|l| decoder.label_index(l))
            .collect::<Result<BTreeSet<_>, _>>()?;
        prefixes.push((indices, positives));
    }
    Ok(PreparedExample { tokens: tokens.to_vec(), prefixes })
}

pub(crate) struct LossOptions<'r> {
    pub dropout: f64,
    pub negative_downsample: Option<f64>,
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl LossOptions<'_> {
    pub fn eval() -> Self {
        LossOptions { dropout: 0.0, negative_downsample: None, rng: None }
    }
}

/// Loss of one example; accumulates gradients when `grads` is given.
pub(crate) fn example_loss(
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    example: &PreparedExample,
    mut options: LossOptions<'_>,
    grads: Option<(&mut ParamVec, &mut ParamVec)>,
) -> Result<f64, NeuralError> {
    let encoded = encoder.encode(&example.tokens)?;
    let mut pass = ExamplePass::new(decoder, &encoded.context, &encoded.summary);
    let mut total = 0.0;

    let mut grads = grads;
    for (prefix, positives) in &example.prefixes {
        let cache = {
            let rate = options.dropout;
            let mut mask_fn;
            let mask: Option<&mut dyn FnMut(usize) -> Vec<f64>> =
                match (rate > 0.0, options.rng.as_deref_mut()) {
                    (true, Some(rng)) => {
                        mask_fn = move |len: usize| {
                            (0..len)
                                .map(|_| {
                                    if rng.random::<f64>() < rate {
                                        0.0
                                    } else {
                                        1.0 / (1.0 - rate)
                                    }
                                })
                                .collect()
                        };
                        Some(&mut mask_fn)
                    }
                    _ => None,
                };
            pass.forward_prefix(prefix, mask)
        };

        let (loss, dh) = {
            let rate = options.negative_downsample;
            let mut keep_fn;
            let keep: Option<&mut dyn FnMut(usize) -> bool> =
                match (rate, options.rng.as_deref_mut()) {
                    (Some(r), Some(rng)) => {
                        keep_fn = move |_w: usize| rng.random::<f64>() < r;
                        Some(&mut keep_fn)
                    }
                    _ => None,
                };
            pass.prefix_loss(
                &cache.h_final,
                positives,
                grads.as_mut().map(|(_, dec)| &mut **dec),
                keep,
            )
        };
        total += loss;
        if let Some((_, dec_grads)) = grads.as_mut() {
            pass.backward_prefix(&cache, dh, dec_grads);
        }
    }

    if let Some((enc_grads, dec_grads)) = grads {
        let (dcontext, dsummary) = pass.finish(dec_grads);
        encoder.backward(&encoded.cache, &dcontext, &dsummary, enc_grads);
    }
    Ok(total)
}

pub(crate) enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64, m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam { beta1, beta2, epsilon } => Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                t: 0,
            },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, scale: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * scale * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon, m, v, t } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                for i in 0..params.len() {
                    let g = grads[i] * scale;
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + *epsilon);
                }
            }
        }
    }
}

/// Uniform init scaled by fan-in for the recurrent blocks, ±0.1 for
/// embeddings, zeros for the binary heads (so every initial probability is
/// exactly 0.5) and biases.
pub(crate) fn init_params(params: &mut ParamVec, rng: &mut ChaCha8Rng) {
    let specs: Vec<(String, Vec<usize>, usize, usize)> = params
        .blocks()
        .iter()
        .map(|b| (b.name.clone(), b.shape.clone(), b.offset, b.len()))
        .collect();
    for (name, shape, offset, len) in specs {
        let data = &mut params.data_mut()[offset..offset + len];
        let leaf = name.rsplit('.').next().unwrap_or(&name);
        if leaf == "heads" {
            continue; // zero heads: every initial probability is 0.5
        }
        if shape.len() == 1 && leaf != "start" {
            continue; // biases stay zero
        }
        let scale = if leaf == "embed" || leaf == "start" {
            0.1
        } else {
            let fan_in = *shape.last().unwrap_or(&1) as f64;
            1.0 / fan_in.sqrt()
        };
        for v in data {
            *v = rng.random_range(-scale..scale);
        }
    }
}

/// Trains the encoder/decoder pair on (question, target poset) pairs by
/// maximizing the binary likelihood over all (prefix path, token) pairs.
///
/// The output vocabulary is the shared vocabulary of the targets; the input
/// vocabulary is collected from the question tokens with a reserved unknown
/// slot. The per-epoch loss trace is evaluated on the full dataset after
/// each epoch with dropout and downsampling disabled.
pub fn train_poset_decoder(
    data: &[(Vec<String>, SemanticPoset)],
    cfg: &TrainConfig,
) -> Result<(SketchModel, TrainTrace), NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let vocab = data[0].1.vocab();
    for (_, target) in data {
        if target.vocab() != vocab {
            return Err(NeuralError::VocabMismatch);
        }
    }

    let enc_cfg = EncoderConfig::with_vocab_from(
        data.iter().flat_map(|(q, _)| q.iter().map(String::as_str)),
        cfg.embed_dim,
        cfg.hidden_dim,
        cfg.layers,
    );
    let mut encoder = EncoderParams::new(enc_cfg);
    let dec_cfg = DecoderConfig::new(
        vocab.all_tokens().iter().cloned(),
        cfg.embed_dim,
        cfg.hidden_dim,
        2 * cfg.hidden_dim,
    );
    let mut decoder = DecoderParams::new(dec_cfg);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_params(&mut encoder.params, &mut rng);
    init_params(&mut decoder.params, &mut rng);

    let prepared: Vec<PreparedExample> = data
        .iter()
        .map(|(tokens, target)| prepare_example(&decoder, tokens, target))
        .collect::<Result<_, _>>()?;

    let mut enc_opt = Optimizer::new(cfg.optimizer, encoder.params.len());
    let mut dec_opt = Optimizer::new(cfg.optimizer, decoder.params.len());
    let mut enc_grads = encoder.params.zeros_like();
    let mut dec_grads = decoder.params.zeros_like();

    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut trace = TrainTrace::default();
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            enc_grads.data_mut().fill(0.0);
            dec_grads.data_mut().fill(0.0);
            for &i in batch {
                example_loss(
                    &encoder,
                    &decoder,
                    &prepared[i],
                    LossOptions {
                        dropout: cfg.dropout,
                        negative_downsample: cfg.negative_downsample,
                        rng: Some(&mut rng),
                    },
                    Some((&mut enc_grads, &mut dec_grads)),
                )?;
            }
            let scale = 1.0 / batch.len() as f64;
            enc_opt.step(encoder.params.data_mut(), enc_grads.data(), cfg.learning_rate, scale);
            dec_opt.step(decoder.params.data_mut(), dec_grads.data(), cfg.learning_rate, scale);
        }

        let mut epoch_loss = 0.0;
        for example in &prepared {
            epoch_loss +=
                example_loss(&encoder, &decoder, example, LossOptions::eval(), None)?;
        }
        trace.epoch_losses.push(epoch_loss / prepared.len() as f64);
    }

    Ok((SketchModel { encoder, decoder }, trace))
}

impl SketchModel {
    /// Probability per output token of extending `prefix`, conditioned on
    /// the encoded question.
    pub fn next_label_probs(
        &self,
        question: &[String],
        prefix: &[Label],
    ) -> Result<std::collections::BTreeMap<Label, f64>, NeuralError> {
        let encoded = self.encoder.encode(question)?;
        let pass = ExamplePass::new(&self.decoder, &encoded.context, &encoded.summary);
        pass.next_label_probs(prefix)
    }
}
