//! Evaluation: end-to-end exact match plus the per-component breakdown
//! (sketch accuracy, primitive precision/recall/F1, traversal-path
//! precision/recall/F1) with per-failure stage attribution.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::dataset::DatasetRecord;
use super::stages::{ModelSketchPredictor, TablePrimitivePredictor, TrainedPathScorer};
use super::HarnessError;
use crate::decode::{
    exact_match, gold_primitives, hpd_predict, DecodeLimits, OraclePathScorer,
    OraclePrimitivePredictor, OracleSketchPredictor, PathEntailmentScorer, PipelineStage,
    PrimitivePredictor, SketchPredictor,
};
use crate::neural::{PathScorerParams, SketchModel};
use crate::phrase_table::{tokenize, PhraseTable};
use crate::poset::{SemanticPoset, Vocabulary};
use crate::query::{parse_query, query_to_poset};
use crate::sketch::{extract_sketch, AbstractionMap};

/// Which implementation fills each pipeline stage.
pub enum SketchStage<'a> {
    Oracle,
    Model(&'a SketchModel),
}

pub enum PrimitiveStage<'a> {
    Oracle,
    Table { table: &'a PhraseTable, threshold: f64 },
}

pub enum PathStage<'a> {
    Oracle,
    Trained { params: &'a PathScorerParams, table: &'a PhraseTable },
}

pub struct PipelineSetup<'a> {
    pub sketch: SketchStage<'a>,
    pub primitives: PrimitiveStage<'a>,
    pub paths: PathStage<'a>,
    pub map: &'a AbstractionMap,
    pub vocab: &'a Vocabulary,
    pub limits: DecodeLimits,
    pub select_meta: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BreakdownReport {
    pub instances: usize,
    pub exact_match: f64,
    pub sketch_accuracy: f64,
    pub primitive_precision: f64,
    pub primitive_recall: f64,
    pub primitive_f1: f64,
    pub path_precision: f64,
    pub path_recall: f64,
    pub path_f1: f64,
    pub failures: usize,
    /// First deviating stage per failed instance.
    pub attribution: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceOutcome {
    pub question: String,
    pub gold_query: String,
    pub predicted_query: Option<String>,
    pub exact_match: bool,
    pub failed_stage: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub instances: usize,
    pub exact_matches: usize,
    pub exact_match: f64,
    pub outcomes: Vec<InstanceOutcome>,
}

struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn new() -> Self {
        Counts { tp: 0, fp: 0, fn_: 0 }
    }

    fn add(&mut self, predicted: &BTreeSet<Vec<String>>, gold: &BTreeSet<Vec<String>>) {
        self.tp += predicted.intersection(gold).count();
        self.fp += predicted.difference(gold).count();
        self.fn_ += gold.difference(predicted).count();
    }

    fn prf(&self) -> (f64, f64, f64) {
        let p = if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let r = if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f1)
    }
}

fn singletons(items: impl IntoIterator<Item = String>) -> BTreeSet<Vec<String>> {
    items.into_iter().map(|s| vec![s]).collect()
}

/// Runs the pipeline per record and computes the component breakdown.
///
/// Attribution picks the first stage whose output deviates from gold:
/// sketch path mismatch, then a missed gold primitive, then an accepted path
/// set different from the gold paths, then reconstruction/query formation.
pub fn run_breakdown(
    records: &[DatasetRecord],
    setup: &PipelineSetup<'_>,
) -> Result<(BreakdownReport, EvalReport), HarnessError> {
    let mut exact = 0usize;
    let mut sketch_ok = 0usize;
    let mut primitive_counts = Counts::new();
    let mut path_counts = Counts::new();
    let mut attribution: BTreeMap<String, usize> = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(records.len());

    for record in records {
        let gold_query = parse_query(&record.query)
            .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?;
        let gold_poset = query_to_poset(&gold_query, setup.vocab)
            .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?;
        let gold_sketch = extract_sketch(&gold_poset, setup.map)
            .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?;
        let question = tokenize(&record.question);

        let instance = run_instance(&question, &gold_poset, setup)?;

        // Gold stage outputs as string sets for the micro metrics.
        let gold_sketch_paths: BTreeSet<Vec<String>> = gold_sketch
            .poset()
            .maximal_paths()
            .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?
            .into_iter()
            .map(|p| p.label_seq().iter().map(|l| l.as_str().to_string()).collect())
            .collect();
        let gold_prims = gold_primitives(&gold_poset, setup.map);
        let gold_prim_set: BTreeSet<Vec<String>> =
            singletons(gold_prims.all().iter().map(|l| l.as_str().to_string()));
        let gold_paths: BTreeSet<Vec<String>> = gold_poset
            .maximal_paths()
            .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?
            .into_iter()
            .map(|p| p.label_seq().iter().map(|l| l.as_str().to_string()).collect())
            .collect();

        let trace = &instance.trace;
        let predicted_sketch: BTreeSet<Vec<String>> =
            trace.sketch_paths.iter().cloned().collect();
        let predicted_prims: BTreeSet<Vec<String>> = singletons(
            trace
                .predicted_predicates
                .iter()
                .chain(trace.predicted_entities.iter())
                .cloned(),
        );
        let accepted_paths: BTreeSet<Vec<String>> =
            trace.accepted_paths.iter().cloned().collect();

        let sketch_correct = predicted_sketch == gold_sketch_paths;
        if sketch_correct {
            sketch_ok += 1;
        }
        primitive_counts.add(&predicted_prims, &gold_prim_set);
        path_counts.add(&accepted_paths, &gold_paths);

        let matched = instance
            .predicted
            .as_ref()
            .map(|q| exact_match(q, &gold_query))
            .unwrap_or(false);
        let failed_stage = if matched {
            exact += 1;
            None
        } else {
            // First deviating stage.
            let stage = if !sketch_correct {
                "sketch"
            } else if !predicted_prims.is_superset(&gold_prim_set) {
                "primitives"
            } else if accepted_paths != gold_paths {
                "paths"
            } else {
                match instance.failed_stage {
                    Some(PipelineStage::Reconstruct) => "reconstruct",
                    Some(PipelineStage::Sketch) => "sketch",
                    Some(PipelineStage::Primitives) | Some(PipelineStage::Candidates) => {
                        "primitives"
                    }
                    Some(PipelineStage::PathScoring) => "paths",
                    Some(PipelineStage::QueryForm) | None => "query-form",
                }
            };
            *attribution.entry(stage.to_string()).or_insert(0) += 1;
            Some(stage.to_string())
        };

        outcomes.push(InstanceOutcome {
            question: record.question.clone(),
            gold_query: gold_query.canonical_text(),
            predicted_query: instance.predicted.as_ref().map(|q| q.canonical_text()),
            exact_match: matched,
            failed_stage,
        });
    }

    let n = records.len().max(1);
    let (pp, pr, pf) = primitive_counts.prf();
    let (tp, tr, tf) = path_counts.prf();
    let failures = records.len() - exact;
    let report = BreakdownReport {
        instances: records.len(),
        exact_match: exact as f64 / n as f64,
        sketch_accuracy: sketch_ok as f64 / n as f64,
        primitive_precision: pp,
        primitive_recall: pr,
        primitive_f1: pf,
        path_precision: tp,
        path_recall: tr,
        path_f1: tf,
        failures,
        attribution,
    };
    let eval = EvalReport {
        instances: records.len(),
        exact_matches: exact,
        exact_match: exact as f64 / n as f64,
        outcomes,
    };
    Ok((report, eval))
}

struct InstanceRun {
    predicted: Option<crate::query::ConjunctiveQuery>,
    trace: crate::decode::DecodeTrace,
    failed_stage: Option<PipelineStage>,
}

fn run_instance(
    question: &[String],
    gold_poset: &SemanticPoset,
    setup: &PipelineSetup<'_>,
) -> Result<InstanceRun, HarnessError> {
    let oracle_sketch;
    let model_sketch;
    let sketch: &dyn SketchPredictor = match &setup.sketch {
        SketchStage::Oracle => {
            oracle_sketch = OracleSketchPredictor { gold: gold_poset, map: setup.map };
            &oracle_sketch
        }
        SketchStage::Model(model) => {
            model_sketch =
                ModelSketchPredictor { model, map: setup.map, limits: setup.limits };
            &model_sketch
        }
    };

    let oracle_prims;
    let table_prims;
    let primitives: &dyn PrimitivePredictor = match &setup.primitives {
        PrimitiveStage::Oracle => {
            oracle_prims = OraclePrimitivePredictor { gold: gold_poset, map: setup.map };
            &oracle_prims
        }
        PrimitiveStage::Table { table, threshold } => {
            table_prims =
                TablePrimitivePredictor { table, threshold: *threshold, map: setup.map };
            &table_prims
        }
    };

    let oracle_paths;
    let trained_paths;
    let paths: &dyn PathEntailmentScorer = match &setup.paths {
        PathStage::Oracle => {
            oracle_paths = OraclePathScorer::new(gold_poset)
                .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?;
            &oracle_paths
        }
        PathStage::Trained { params, table } => {
            trained_paths = TrainedPathScorer { params, table, map: setup.map };
            &trained_paths
        }
    };

    match hpd_predict(
        question,
        sketch,
        primitives,
        paths,
        setup.map,
        setup.vocab,
        &setup.select_meta,
        &setup.limits,
    ) {
        Ok(output) => Ok(InstanceRun {
            predicted: Some(output.query),
            trace: output.trace,
            failed_stage: None,
        }),
        Err(failure) => Ok(InstanceRun {
            predicted: None,
            trace: failure.trace,
            failed_stage: Some(failure.stage),
        }),
    }
}
