//! Path entailment scoring: a trainable logistic model over features tying
//! a candidate path to the question.
//!
//! The heavyweight entailment network is replaced by this feature model
//! behind the same interface (probability in (0,1), thresholded at 0.5
//! downstream). Features per candidate path: phrase-table evidence for its
//! primitives, literal token overlap, path length, and the positions (and
//! position gaps) of the question phrases the primitives come from — the
//! gap features are what separate correctly paired slot fills from
//! permuted ones on compositional questions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::sigmoid;
use super::train::Optimizer;
use super::{NeuralError, TrainConfig};
use crate::phrase_table::PhraseTable;
use crate::poset::Label;
use crate::sketch::AbstractionMap;

pub const FEATURE_NAMES: [&str; 8] = [
    "mean_evidence",
    "min_evidence",
    "zero_evidence_frac",
    "token_overlap",
    "path_length",
    "mean_position_gap",
    "position_monotone_frac",
    "primitive_count",
];

/// Weights and bias of the logistic path classifier, plus the names of the
/// features it was trained over (pinned so checkpoints reject drift).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PathScorerParams {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PathScorerParams {
    pub fn zeros() -> Self {
        PathScorerParams {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights: vec![0.0; FEATURE_NAMES.len()],
            bias: 0.0,
        }
    }
}

impl Default for PathScorerParams {
    fn default() -> Self {
        Self::zeros()
    }
}

fn label_words(label: &Label) -> Vec<String> {
    label.as_str().split('_').map(|w| w.to_lowercase()).collect()
}

/// The documented feature vector for one (question, path) pair.
pub fn path_features(
    question: &[String],
    path: &[Label],
    table: &PhraseTable,
    map: &AbstractionMap,
) -> Vec<f64> {
    let primitives: Vec<&Label> = path.iter().filter(|l| map.is_primitive(l)).collect();
    let evidence: Vec<(f64, Option<usize>)> =
        primitives.iter().map(|p| table.best_evidence(question, p)).collect();

    let count = primitives.len();
    let (mean_ev, min_ev, zero_frac) = if count == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let sum: f64 = evidence.iter().map(|(p, _)| p).sum();
        let min = evidence.iter().map(|(p, _)| *p).fold(f64::INFINITY, f64::min);
        let zeros = evidence.iter().filter(|(p, _)| *p == 0.0).count();
        (sum / count as f64, min, zeros as f64 / count as f64)
    };

    let overlap = if count == 0 {
        0.0
    } else {
        let hits = primitives
            .iter()
            .filter(|p| label_words(p).iter().all(|w| question.contains(w)))
            .count();
        hits as f64 / count as f64
    };

    let positions: Vec<usize> = evidence.iter().filter_map(|(_, pos)| *pos).collect();
    let (mean_gap, monotone) = if positions.len() < 2 {
        (0.0, 1.0)
    } else {
        let gaps: Vec<f64> = positions
            .windows(2)
            .map(|w| (w[1] as f64 - w[0] as f64).abs())
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64 / question.len().max(1) as f64;
        let mono = positions.windows(2).filter(|w| w[1] >= w[0]).count() as f64
            / (positions.len() - 1) as f64;
        (mean, mono)
    };

    vec![
        mean_ev,
        min_ev,
        zero_frac,
        overlap,
        path.len() as f64 / 10.0,
        mean_gap,
        monotone,
        count as f64 / 5.0,
    ]
}

/// P(path | question) = σ(w · features + b). Zero weights give exactly 0.5.
pub fn score_path(
    question: &[String],
    path: &[Label],
    params: &PathScorerParams,
    table: &PhraseTable,
    map: &AbstractionMap,
) -> f64 {
    let features = path_features(question, path, table, map);
    let z: f64 =
        params.weights.iter().zip(&features).map(|(w, f)| w * f).sum::<f64>() + params.bias;
    sigmoid(z)
}

/// One training instance: positives are gold traversal paths, negatives are
/// other slot permutations.
#[derive(Clone, Debug)]
pub struct PathScorerExample {
    pub question: Vec<String>,
    pub positives: Vec<Vec<Label>>,
    pub negatives: Vec<Vec<Label>>,
}

/// Logistic-loss minimization over all (question, path, label) triples.
/// Deterministic given the seed.
pub fn train_path_scorer(
    data: &[PathScorerExample],
    table: &PhraseTable,
    map: &AbstractionMap,
    cfg: &TrainConfig,
) -> Result<(PathScorerParams, super::TrainTrace), NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let total_pos: usize = data.iter().map(|e| e.positives.len()).sum();
    let total_neg: usize = data.iter().map(|e| e.negatives.len()).sum();
    if total_pos == 0 {
        return Err(NeuralError::DegenerateDataset("no positive paths".to_string()));
    }
    if total_neg == 0 {
        return Err(NeuralError::DegenerateDataset("no negative paths".to_string()));
    }

    // Pre-extract features once; training then touches only the weights.
    let mut instances: Vec<(Vec<f64>, f64)> = Vec::with_capacity(total_pos + total_neg);
    for example in data {
        for path in &example.positives {
            instances.push((path_features(&example.question, path, table, map), 1.0));
        }
        for path in &example.negatives {
            instances.push((path_features(&example.question, path, table, map), 0.0));
        }
    }

    let dim = FEATURE_NAMES.len();
    let mut params = PathScorerParams::zeros();
    let mut optimizer = Optimizer::new(cfg.optimizer, dim + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut trace = super::TrainTrace::default();

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grad = vec![0.0; dim + 1];
            for &i in batch {
                let (features, target) = &instances[i];
                let z: f64 = params.weights.iter().zip(features).map(|(w, f)| w * f).sum::<f64>()
                    + params.bias;
                let p = sigmoid(z);
                let d = p - target;
                for (g, f) in grad.iter_mut().zip(features) {
                    *g += d * f;
                }
                grad[dim] += d;
            }
            let mut flat: Vec<f64> = params.weights.clone();
            flat.push(params.bias);
            optimizer.step(&mut flat, &grad, cfg.learning_rate, 1.0 / batch.len() as f64);
            params.bias = flat.pop().expect("bias");
            params.weights = flat;
        }

        let mut loss = 0.0;
        for (features, target) in &instances {
            let z: f64 = params.weights.iter().zip(features).map(|(w, f)| w * f).sum::<f64>()
                + params.bias;
            let p = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
            loss -= target * p.ln() + (1.0 - target) * (1.0 - p).ln();
        }
        trace.epoch_losses.push(loss / instances.len() as f64);
    }

    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phrase_table::{tokenize, InduceParams, PrimitiveSet};
    use crate::poset::test_fixtures::labels;
    use crate::poset::Vocabulary;

    fn fixture() -> (PhraseTable, AbstractionMap) {
        let vocab = Vocabulary::new(
            labels(&["INFLUENCE", "MARRY", "x0", "Maxim_Gorky", "Siri_von_Essen"]),
            labels(&["x0", "Maxim_Gorky", "Siri_von_Essen"]),
        )
        .unwrap();
        let map = AbstractionMap::predicate_entity(&vocab).unwrap();
        let corpus = vec![
            (
                "who influences maxim gorky and marries siri von essen".to_string(),
                PrimitiveSet::new(
                    labels(&["INFLUENCE", "MARRY"]).into_iter().collect(),
                    labels(&["Maxim_Gorky", "Siri_von_Essen"]).into_iter().collect(),
                ),
            ),
            (
                "who influences maxim gorky".to_string(),
                PrimitiveSet::new(
                    labels(&["INFLUENCE"]).into_iter().collect(),
                    labels(&["Maxim_Gorky"]).into_iter().collect(),
                ),
            ),
            (
                "who marries siri von essen".to_string(),
                PrimitiveSet::new(
                    labels(&["MARRY"]).into_iter().collect(),
                    labels(&["Siri_von_Essen"]).into_iter().collect(),
                ),
            ),
        ];
        let table = PhraseTable::induce(&corpus, InduceParams::default()).unwrap();
        (table, map)
    }

    #[test]
    fn zero_weights_score_exactly_one_half() {
        let (table, map) = fixture();
        let params = PathScorerParams::zeros();
        let q = tokenize("who influences maxim gorky");
        let s = score_path(&q, &labels(&["x0", "INFLUENCE", "Maxim_Gorky"]), &params, &table, &map);
        assert_eq!(s, 0.5);
    }

    #[test]
    fn separable_pair_converges_to_correct_ordering() {
        let (table, map) = fixture();
        let q = tokenize("who influences maxim gorky");
        let gold = labels(&["x0", "INFLUENCE", "Maxim_Gorky"]);
        let wrong = labels(&["x0", "MARRY", "Siri_von_Essen"]);
        let data = vec![PathScorerExample {
            question: q.clone(),
            positives: vec![gold.clone()],
            negatives: vec![wrong.clone()],
        }];
        let cfg = TrainConfig { epochs: 200, learning_rate: 1.0, ..TrainConfig::desk_scale() };
        let (params, trace) = train_path_scorer(&data, &table, &map, &cfg).unwrap();
        let s_gold = score_path(&q, &gold, &params, &table, &map);
        let s_wrong = score_path(&q, &wrong, &params, &table, &map);
        assert!(s_gold > 0.5, "gold {s_gold}");
        assert!(s_wrong < 0.5, "wrong {s_wrong}");
        assert!(trace.epoch_losses.last().unwrap() < &trace.epoch_losses[0]);
    }

    #[test]
    fn same_seed_gives_identical_params() {
        let (table, map) = fixture();
        let q = tokenize("who influences maxim gorky and marries siri von essen");
        let data = vec![PathScorerExample {
            question: q,
            positives: vec![labels(&["x0", "INFLUENCE", "Maxim_Gorky"])],
            negatives: vec![
                labels(&["x0", "INFLUENCE", "Siri_von_Essen"]),
                labels(&["x0", "MARRY", "Maxim_Gorky"]),
            ],
        }];
        let cfg = TrainConfig { epochs: 20, ..TrainConfig::desk_scale() };
        let (a, _) = train_path_scorer(&data, &table, &map, &cfg).unwrap();
        let (b, _) = train_path_scorer(&data, &table, &map, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_dataset_is_rejected() {
        let (table, map) = fixture();
        let data = vec![PathScorerExample {
            question: tokenize("who"),
            positives: vec![labels(&["x0"])],
            negatives: vec![],
        }];
        assert!(matches!(
            train_path_scorer(&data, &table, &map, &TrainConfig::desk_scale()),
            Err(NeuralError::DegenerateDataset(_))
        ));
    }

    #[test]
    fn zero_evidence_path_scores_below_gold_after_training() {
        let (table, map) = fixture();
        let q = tokenize("who influences maxim gorky");
        let gold = labels(&["x0", "INFLUENCE", "Maxim_Gorky"]);
        // Fillers that never co-occur with this question's phrases.
        let alien = labels(&["x0", "MARRY", "Siri_von_Essen"]);
        let data = vec![
            PathScorerExample {
                question: q.clone(),
                positives: vec![gold.clone()],
                negatives: vec![alien.clone()],
            },
            PathScorerExample {
                question: tokenize("who marries siri von essen"),
                positives: vec![labels(&["x0", "MARRY", "Siri_von_Essen"])],
                negatives: vec![labels(&["x0", "INFLUENCE", "Maxim_Gorky"])],
            },
        ];
        let cfg = TrainConfig { epochs: 300, learning_rate: 1.0, ..TrainConfig::desk_scale() };
        let (params, _) = train_path_scorer(&data, &table, &map, &cfg).unwrap();
        let s_gold = score_path(&q, &gold, &params, &table, &map);
        let s_alien = score_path(&q, &alien, &params, &table, &map);
        assert!(s_gold > s_alien, "gold {s_gold} vs alien {s_alien}");
    }

    #[test]
    fn features_have_documented_arity() {
        let (table, map) = fixture();
        let q = tokenize("who influences maxim gorky");
        let f = path_features(&q, &labels(&["x0", "INFLUENCE", "Maxim_Gorky"]), &table, &map);
        assert_eq!(f.len(), FEATURE_NAMES.len());
        assert!(f.iter().all(|v| v.is_finite()));
    }
}
