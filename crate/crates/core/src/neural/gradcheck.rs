//! Central finite-difference verification of the hand-derived gradients.
//!
//! Walks every scalar of every parameter block of the encoder and decoder,
//! perturbs it by ±ε, and compares the numeric derivative of the full
//! example loss against the analytic gradient. Relative error is
//! `|a − n| / max(|a| + |n|, 1e-3)`, reported per block and overall; the
//! floor keeps f64 cancellation noise on near-zero gradients from
//! registering while still flagging any absolute discrepancy above ~1e-7.

use std::collections::BTreeMap;

use super::decoder::DecoderParams;
use super::encoder::EncoderParams;
use super::train::{example_loss, prepare_example, LossOptions, PreparedExample};
use super::NeuralError;
use crate::poset::SemanticPoset;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_block: BTreeMap<String, f64>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-3)
}

fn check_side(
    which: &str,
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    example: &PreparedExample,
    analytic: &[f64],
    epsilon: f64,
    report: &mut GradCheckReport,
    corruption: Option<&str>,
) -> Result<(), NeuralError> {
    let mut enc = encoder.clone();
    let mut dec = decoder.clone();
    let param_count =
        if which == "enc" { enc.params.len() } else { dec.params.len() };

    for i in 0..param_count {
        let original = if which == "enc" { enc.params.data()[i] } else { dec.params.data()[i] };
        let eval_at = |value: f64, enc: &mut EncoderParams, dec: &mut DecoderParams| {
            if which == "enc" {
                enc.params.data_mut()[i] = value;
            } else {
                dec.params.data_mut()[i] = value;
            }
            example_loss(enc, dec, example, LossOptions::eval(), None)
        };
        let up = eval_at(original + epsilon, &mut enc, &mut dec)?;
        let down = eval_at(original - epsilon, &mut enc, &mut dec)?;
        eval_at(original, &mut enc, &mut dec)?;
        let numeric = (up - down) / (2.0 * epsilon);

        let block = if which == "enc" {
            enc.params.block_of(i)
        } else {
            dec.params.block_of(i)
        };
        let block_name = format!("{which}.{}", block.name);
        let mut a = analytic[i];
        if corruption == Some(block_name.as_str()) && i == block.offset {
            a += 1.0;
        }
        let err = rel_error(a, numeric);
        let entry = report.per_block.entry(block_name).or_insert(0.0);
        if err > *entry {
            *entry = err;
        }
        if err > report.max_rel_error {
            report.max_rel_error = err;
        }
    }
    Ok(())
}

fn run_check(
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    question: &[String],
    target: &SemanticPoset,
    epsilon: f64,
    corruption: Option<&str>,
) -> Result<GradCheckReport, NeuralError> {
    let example = prepare_example(decoder, question, target)?;
    let mut enc_grads = encoder.params.zeros_like();
    let mut dec_grads = decoder.params.zeros_like();
    example_loss(
        encoder,
        decoder,
        &example,
        LossOptions::eval(),
        Some((&mut enc_grads, &mut dec_grads)),
    )?;

    let mut report = GradCheckReport { per_block: BTreeMap::new(), max_rel_error: 0.0 };
    check_side("enc", encoder, decoder, &example, enc_grads.data(), epsilon, &mut report, corruption)?;
    check_side("dec", encoder, decoder, &example, dec_grads.data(), epsilon, &mut report, corruption)?;
    Ok(report)
}

/// Compares analytic gradients against central finite differences for every
/// parameter block on one (question, target poset) example.
pub fn finite_diff_check(
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    question: &[String],
    target: &SemanticPoset,
    epsilon: f64,
) -> Result<GradCheckReport, NeuralError> {
    run_check(encoder, decoder, question, target, epsilon, None)
}

/// Negative control: adds 1.0 to the first analytic entry of the named block
/// (`enc.<block>` or `dec.<block>`) before comparison. A working checker
/// must flag it.
pub fn finite_diff_check_corrupted(
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    question: &[String],
    target: &SemanticPoset,
    epsilon: f64,
    corrupt_block: &str,
) -> Result<GradCheckReport, NeuralError> {
    run_check(encoder, decoder, question, target, epsilon, Some(corrupt_block))
}
