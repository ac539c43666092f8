//! Desk-scale learnable components, 64-bit floating point throughout.
//!
//! The encoder is a bidirectional GRU stack, the decoder a recurrent cell
//! with attention and one binary head per output token, trained against the
//! prefix paths of the target posets. A feature-based logistic classifier
//! stands in for the path-entailment network behind the same interface.
//! Everything is hand-differentiated; [`gradcheck::finite_diff_check`]
//! verifies every parameter block against central finite differences.
//!
//! Determinism: given a fixed seed, training visits examples in a
//! ChaCha-derived order and produces bitwise-identical parameters and loss
//! traces across runs.

pub mod checkpoint;
pub mod decoder;
pub mod encoder;
pub mod gradcheck;
pub mod gru;
pub mod params;
pub mod scorer;
pub mod train;

pub use decoder::{DecoderConfig, DecoderParams, ExamplePass};
pub use encoder::{EncoderConfig, EncoderParams, UNK_TOKEN};
pub use gradcheck::{finite_diff_check, finite_diff_check_corrupted, GradCheckReport};
pub use params::ParamVec;
pub use scorer::{
    path_features, score_path, train_path_scorer, PathScorerExample, PathScorerParams,
    FEATURE_NAMES,
};
pub use train::{train_poset_decoder, SketchModel, TrainTrace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poset::{Label, ValidationReport};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("label {0} is not in the output vocabulary")]
    UnknownLabel(Label),
    #[error("training target is not a valid semantic poset")]
    InvalidPoset(ValidationReport),
    #[error("training targets use different vocabularies")]
    VocabMismatch,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("checkpoint mismatch: {0}")]
    ShapeMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint sidecar error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Poset(#[from] crate::poset::PosetError),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Learnable-component training configuration.
///
/// `desk_scale` is the default used by the tests and the CLI; `paper_scale`
/// mirrors the original large-model setting and is retained as a documented
/// preset (50 epochs, batch 64, 512/300 dims, dropout 0.5, 2 layers).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub optimizer: OptimizerKind,
    /// Keep each negative (prefix, token) term with this probability.
    pub negative_downsample: Option<f64>,
}

impl TrainConfig {
    pub fn desk_scale() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            learning_rate: 0.5,
            dropout: 0.0,
            seed: 1,
            hidden_dim: 64,
            embed_dim: 32,
            layers: 1,
            optimizer: OptimizerKind::Sgd,
            negative_downsample: None,
        }
    }

    pub fn paper_scale() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.001,
            dropout: 0.5,
            seed: 1,
            hidden_dim: 512,
            embed_dim: 300,
            layers: 2,
            optimizer: OptimizerKind::adam_default(),
            negative_downsample: None,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk_scale()
    }
}
