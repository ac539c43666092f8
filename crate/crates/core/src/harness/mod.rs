//! Dataset ingestion, synthetic data generation, evaluation and the
//! component breakdown report.

pub mod breakdown;
pub mod dataset;
pub mod generator;
pub mod stages;

pub use breakdown::{
    run_breakdown, BreakdownReport, EvalReport, InstanceOutcome, PathStage, PipelineSetup,
    PrimitiveStage, SketchStage,
};
pub use dataset::{
    load_dataset, save_dataset, split_records, vocab_from_records, DatasetRecord, FieldMap,
    LoadIssue, Split,
};
pub use generator::{generate_synthetic, GeneratorConfig, GeneratorError, TemplateKind};
pub use stages::{
    ModelNextLabelScorer, ModelSketchPredictor, TablePrimitivePredictor, TrainedPathScorer,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::DecodeLimits;
    use crate::sketch::AbstractionMap;

    /// All-oracle pipeline over a generated corpus: every stage replays
    /// gold, so every metric must be exactly 1.
    #[test]
    fn all_oracle_breakdown_is_perfect() {
        let cfg = GeneratorConfig {
            train_size: 30,
            dev_size: 10,
            test_size: 10,
            ..Default::default()
        };
        let records = generate_synthetic(&cfg).unwrap();
        let vocab = vocab_from_records(&records).unwrap();
        let map = AbstractionMap::predicate_entity(&vocab).unwrap();
        let setup = PipelineSetup {
            sketch: SketchStage::Oracle,
            primitives: PrimitiveStage::Oracle,
            paths: PathStage::Oracle,
            map: &map,
            vocab: &vocab,
            limits: DecodeLimits::default(),
            select_meta: "DISTINCT ?x0".to_string(),
        };
        let (report, eval) = run_breakdown(&records, &setup).unwrap();
        assert_eq!(report.exact_match, 1.0, "attribution: {:?}", report.attribution);
        assert_eq!(report.sketch_accuracy, 1.0);
        assert_eq!(report.primitive_f1, 1.0);
        assert_eq!(report.path_f1, 1.0);
        assert_eq!(report.failures, 0);
        assert!(report.attribution.is_empty());
        assert_eq!(eval.exact_matches, records.len());
    }

    /// Phrase-table primitives with oracle sketch/paths: recall must be
    /// essentially perfect while precision stays lower, and attribution
    /// counts must reconcile with the failure total.
    #[test]
    fn phrase_table_primitives_land_in_the_high_recall_regime() {
        use crate::phrase_table::{InduceParams, PhraseTable};

        let cfg = GeneratorConfig {
            train_size: 120,
            dev_size: 30,
            test_size: 20,
            ..Default::default()
        };
        let records = generate_synthetic(&cfg).unwrap();
        let vocab = vocab_from_records(&records).unwrap();
        let map = AbstractionMap::predicate_entity(&vocab).unwrap();

        let train = split_records(&records, Split::Train);
        let corpus: Vec<(String, crate::phrase_table::PrimitiveSet)> = train
            .iter()
            .map(|r| {
                let q = crate::query::parse_query(&r.query).unwrap();
                let poset = crate::query::query_to_poset(&q, &vocab).unwrap();
                (r.question.clone(), crate::decode::gold_primitives(&poset, &map))
            })
            .collect();
        let table = PhraseTable::induce(&corpus, InduceParams::default()).unwrap();

        let dev = split_records(&records, Split::Dev);
        let setup = PipelineSetup {
            sketch: SketchStage::Oracle,
            primitives: PrimitiveStage::Table { table: &table, threshold: 0.5 },
            paths: PathStage::Oracle,
            map: &map,
            vocab: &vocab,
            limits: DecodeLimits::default(),
            select_meta: "DISTINCT ?x0".to_string(),
        };
        let (report, _) = run_breakdown(&dev, &setup).unwrap();
        assert!(report.primitive_recall >= 0.99, "recall {}", report.primitive_recall);
        assert!(
            report.primitive_precision < report.primitive_recall,
            "precision {} vs recall {}",
            report.primitive_precision,
            report.primitive_recall
        );
        let attributed: usize = report.attribution.values().sum();
        assert_eq!(attributed, report.failures);
        // F1 is the harmonic mean of the emitted precision/recall.
        let harmonic = 2.0 * report.primitive_precision * report.primitive_recall
            / (report.primitive_precision + report.primitive_recall);
        assert!((report.primitive_f1 - harmonic).abs() < 1e-9);
    }
}
