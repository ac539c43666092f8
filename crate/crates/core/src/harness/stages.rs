//! Adapters that plug trained models (or oracles) into the pipeline traits.

use std::collections::BTreeMap;

use crate::decode::{
    generate_poset, DecodeError, DecodeLimits, NextLabelScorer, PathEntailmentScorer,
    PrimitivePredictor, SketchPredictor,
};
use crate::neural::{score_path, PathScorerParams, SketchModel};
use crate::phrase_table::{PhraseTable, PrimitiveSet};
use crate::poset::Label;
use crate::sketch::{AbstractionMap, Sketch};

/// Next-label scorer for one question: encodes once, then runs the decoder
/// along each queried prefix.
pub struct ModelNextLabelScorer<'a> {
    model: &'a SketchModel,
    question: Vec<String>,
}

impl<'a> ModelNextLabelScorer<'a> {
    pub fn new(model: &'a SketchModel, question: &[String]) -> Self {
        ModelNextLabelScorer { model, question: question.to_vec() }
    }
}

impl NextLabelScorer for ModelNextLabelScorer<'_> {
    fn next_label_probs(&self, prefix: &[Label]) -> BTreeMap<Label, f64> {
        self.model.next_label_probs(&self.question, prefix).unwrap_or_default()
    }
}

/// Sketch prediction with the trained decoder over the abstract vocabulary.
pub struct ModelSketchPredictor<'a> {
    pub model: &'a SketchModel,
    pub map: &'a AbstractionMap,
    pub limits: DecodeLimits,
}

impl SketchPredictor for ModelSketchPredictor<'_> {
    fn predict_sketch(&self, question: &[String]) -> Result<Sketch, DecodeError> {
        let scorer = ModelNextLabelScorer::new(self.model, question);
        let poset = generate_poset(&scorer, self.map.abstract_vocab(), &self.limits)?;
        Ok(Sketch::from_abstract_poset(poset, self.map))
    }
}

/// Primitive prediction from the induced phrase table.
pub struct TablePrimitivePredictor<'a> {
    pub table: &'a PhraseTable,
    pub threshold: f64,
    pub map: &'a AbstractionMap,
}

impl PrimitivePredictor for TablePrimitivePredictor<'_> {
    fn predict_primitives(&self, question: &[String]) -> PrimitiveSet {
        self.table.predict(question, self.threshold, self.map)
    }
}

/// Path entailment from the trained logistic scorer.
pub struct TrainedPathScorer<'a> {
    pub params: &'a PathScorerParams,
    pub table: &'a PhraseTable,
    pub map: &'a AbstractionMap,
}

impl PathEntailmentScorer for TrainedPathScorer<'_> {
    fn score_path(&self, question: &[String], path: &[Label]) -> f64 {
        score_path(question, path, self.params, self.table, self.map)
    }
}
