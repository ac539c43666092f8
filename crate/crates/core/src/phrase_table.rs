//! Phrase-table induction and primitive prediction.
//!
//! The table maps question n-grams to primitives with a translation
//! probability estimated as a co-occurrence ratio over the training corpus:
//! `p(m | g) = #questions containing g whose gold primitives include m
//! / #questions containing g`. Prediction returns every primitive whose
//! probability exceeds the threshold for some n-gram of the question, which
//! lands in the intended high-recall / low-precision regime.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::poset::Label;
use crate::sketch::AbstractionMap;

/// Lowercases and splits on whitespace and punctuation; a possessive `'s`
/// becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word(c) {
            current.push(c);
            i += 1;
        } else if c == '\''
            && chars.get(i + 1) == Some(&'s')
            && chars.get(i + 2).map_or(true, |&next| !is_word(next))
        {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push("'s".to_string());
            i += 2;
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            i += 1;
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// All distinct n-grams of `tokens` up to length `max_n`, space-joined.
fn ngrams(tokens: &[String], max_n: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for n in 1..=max_n.min(tokens.len()) {
        for window in tokens.windows(n) {
            out.insert(window.join(" "));
        }
    }
    out
}

/// Candidate primitives split by class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrimitiveSet {
    pub predicates: BTreeSet<Label>,
    pub entities: BTreeSet<Label>,
}

impl PrimitiveSet {
    pub fn new(predicates: BTreeSet<Label>, entities: BTreeSet<Label>) -> Self {
        PrimitiveSet { predicates, entities }
    }

    pub fn all(&self) -> BTreeSet<Label> {
        self.predicates.union(&self.entities).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.predicates.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty() && self.entities.is_empty()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.predicates.contains(label) || self.entities.contains(label)
    }

    pub fn is_superset(&self, other: &PrimitiveSet) -> bool {
        self.predicates.is_superset(&other.predicates)
            && self.entities.is_superset(&other.entities)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InduceParams {
    pub max_n: usize,
    pub min_count: usize,
    pub floor_prob: f64,
}

impl Default for InduceParams {
    fn default() -> Self {
        InduceParams { max_n: 4, min_count: 1, floor_prob: 0.05 }
    }
}

#[derive(Debug, Error)]
pub enum PhraseTableError {
    #[error("cannot induce a phrase table from an empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// phrase → primitive → translation probability.
#[derive(Clone, Debug, PartialEq)]
pub struct PhraseTable {
    entries: BTreeMap<String, BTreeMap<Label, f64>>,
    max_n: usize,
}

impl PhraseTable {
    /// Counts question-level co-occurrence of n-grams and gold primitives.
    /// Deterministic for a given corpus and parameters.
    pub fn induce(
        corpus: &[(String, PrimitiveSet)],
        params: InduceParams,
    ) -> Result<Self, PhraseTableError> {
        if corpus.is_empty() {
            return Err(PhraseTableError::EmptyCorpus);
        }
        let mut phrase_count: BTreeMap<String, usize> = BTreeMap::new();
        let mut pair_count: BTreeMap<String, BTreeMap<Label, usize>> = BTreeMap::new();
        for (question, gold) in corpus {
            let tokens = tokenize(question);
            for gram in ngrams(&tokens, params.max_n) {
                *phrase_count.entry(gram.clone()).or_insert(0) += 1;
                let per_primitive = pair_count.entry(gram).or_default();
                for primitive in gold.all() {
                    *per_primitive.entry(primitive).or_insert(0) += 1;
                }
            }
        }
        let mut entries: BTreeMap<String, BTreeMap<Label, f64>> = BTreeMap::new();
        for (gram, per_primitive) in pair_count {
            let denom = phrase_count[&gram];
            if denom < params.min_count {
                continue;
            }
            let mut row = BTreeMap::new();
            for (primitive, num) in per_primitive {
                let prob = num as f64 / denom as f64;
                if prob >= params.floor_prob {
                    row.insert(primitive, prob);
                }
            }
            if !row.is_empty() {
                entries.insert(gram, row);
            }
        }
        Ok(PhraseTable { entries, max_n: params.max_n })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, phrase: &str, primitive: &Label) -> f64 {
        self.entries.get(phrase).and_then(|row| row.get(primitive)).copied().unwrap_or(0.0)
    }

    /// Best translation probability for `primitive` over all n-grams of the
    /// question, with the position of the strongest phrase (token index of
    /// its first word). Used by the path scorer features.
    pub fn best_evidence(&self, tokens: &[String], primitive: &Label) -> (f64, Option<usize>) {
        let mut best = 0.0;
        let mut best_pos = None;
        for n in 1..=self.max_n.min(tokens.len()) {
            for (start, window) in tokens.windows(n).enumerate() {
                let gram = window.join(" ");
                if let Some(row) = self.entries.get(&gram) {
                    if let Some(&p) = row.get(primitive) {
                        if p > best {
                            best = p;
                            best_pos = Some(start);
                        }
                    }
                }
            }
        }
        (best, best_pos)
    }

    /// Every primitive whose probability strictly exceeds `threshold` for
    /// some n-gram of the question, partitioned by the abstraction map.
    pub fn predict(
        &self,
        tokens: &[String],
        threshold: f64,
        map: &AbstractionMap,
    ) -> PrimitiveSet {
        let mut predicates = BTreeSet::new();
        let mut entities = BTreeSet::new();
        for gram in ngrams(tokens, self.max_n) {
            if let Some(row) = self.entries.get(&gram) {
                for (primitive, &prob) in row {
                    if prob > threshold {
                        if map.predicates().contains(primitive) {
                            predicates.insert(primitive.clone());
                        } else if map.entities().contains(primitive) {
                            entities.insert(primitive.clone());
                        }
                    }
                }
            }
        }
        PrimitiveSet { predicates, entities }
    }

    /// Sorted `phrase<TAB>primitive<TAB>prob` lines; byte-deterministic.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#max-n\t{}\n", self.max_n);
        for (phrase, row) in &self.entries {
            for (primitive, prob) in row {
                out.push_str(&format!("{phrase}\t{primitive}\t{prob}\n"));
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, PhraseTableError> {
        let mut entries: BTreeMap<String, BTreeMap<Label, f64>> = BTreeMap::new();
        let mut max_n = InduceParams::default().max_n;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] == "#max-n" {
                max_n = fields
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| PhraseTableError::Parse {
                        line: line_no,
                        message: "bad #max-n header".to_string(),
                    })?;
                continue;
            }
            if fields.len() != 3 {
                return Err(PhraseTableError::Parse {
                    line: line_no,
                    message: "expected phrase<TAB>primitive<TAB>prob".to_string(),
                });
            }
            let primitive = Label::new(fields[1]).map_err(|e| PhraseTableError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let prob: f64 = fields[2].parse().map_err(|_| PhraseTableError::Parse {
                line: line_no,
                message: "probability is not a number".to_string(),
            })?;
            entries.entry(fields[0].to_string()).or_default().insert(primitive, prob);
        }
        Ok(PhraseTable { entries, max_n })
    }
}

/// Set precision / recall / F1 of a predicted primitive set against gold.
/// Empty predicted with empty gold counts as a perfect score.
pub fn prf(predicted: &PrimitiveSet, gold: &PrimitiveSet) -> (f64, f64, f64) {
    let predicted = predicted.all();
    let gold = gold.all();
    if predicted.is_empty() && gold.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    let overlap = predicted.intersection(&gold).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { overlap / predicted.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { overlap / gold.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}
