//! Abstraction and sketch extraction.
//!
//! The abstraction function maps every predicate to the abstract token `P`,
//! every entity to `E`, and leaves variables unchanged. A *sketch* is the
//! abstraction of a semantic poset with structurally redundant vertices
//! merged away; its `P`/`E` vertices are slots to be filled by concrete
//! primitives later.
//!
//! Two merge modes exist:
//!
//! - [`MergeMode::InNeighbor`] (default): the sketch is the canonical poset
//!   whose maximal paths are exactly the deduplicated abstract images of the
//!   input's maximal paths. It is computed by rebuilding from those paths,
//!   which subsumes iterated same-label/same-in-neighbor merging and also
//!   splits abstract vertices whose sharing would break the poset properties,
//!   so the result always validates. Inputs whose abstract path set is not
//!   realizable as a semantic poset (an abstract path that is a proper prefix
//!   of another, which arises when an entity with outgoing relations and a
//!   plain entity hang as siblings off the same head) are rejected loudly.
//! - [`MergeMode::Strict`]: merges a vertex pair only when label, in-neighbor
//!   set and out-neighbor set all coincide, iterated to a fixpoint in
//!   deterministic order. This rule cannot merge parallel sibling branches
//!   (the running example deadlocks with two `P` siblings), so the fixpoint
//!   frequently violates property 1 and is reported as an error; it is kept
//!   behind this flag for comparison.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::poset::{
    reconstruct, Label, PosetError, SemanticPoset, ValidationReport, VertexId, Vocabulary,
};
use crate::query::is_variable_token;

/// The abstraction function `f` together with the token classes it is built
/// from and the abstract vocabulary it maps into.
#[derive(Clone, Debug)]
pub struct AbstractionMap {
    predicates: BTreeSet<Label>,
    entities: BTreeSet<Label>,
    variables: BTreeSet<Label>,
    predicate_token: Label,
    entity_token: Label,
    abstract_vocab: Vocabulary,
}

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("token {0} is not in the concrete vocabulary")]
    UnknownToken(Label),
    #[error("abstract token {0} collides with a concrete token")]
    AbstractTokenCollision(Label),
    #[error("input is not a valid semantic poset")]
    InvalidPoset(ValidationReport),
    #[error("abstract path set is not realizable as a semantic poset: {reason}")]
    Unrepresentable { reason: String },
    #[error("strict-mode fixpoint is not a valid semantic poset")]
    InvalidSketch(ValidationReport),
    #[error(transparent)]
    Poset(#[from] PosetError),
}

impl AbstractionMap {
    /// The two-class scheme over a concrete vocabulary: non-once-only tokens
    /// are predicates (→ `P`), once-only tokens of the variable class map to
    /// themselves, remaining once-only tokens are entities (→ `E`).
    pub fn predicate_entity(vocab: &Vocabulary) -> Result<Self, SketchError> {
        let mut predicates = BTreeSet::new();
        let mut entities = BTreeSet::new();
        let mut variables = BTreeSet::new();
        for token in vocab.all_tokens() {
            if !vocab.is_once_only(token) {
                predicates.insert(token.clone());
            } else if is_variable_token(token.as_str()) {
                variables.insert(token.clone());
            } else {
                entities.insert(token.clone());
            }
        }
        Self::new(predicates, entities, variables)
    }

    pub fn new(
        predicates: BTreeSet<Label>,
        entities: BTreeSet<Label>,
        variables: BTreeSet<Label>,
    ) -> Result<Self, SketchError> {
        let predicate_token = Label::new("P").expect("static");
        let entity_token = Label::new("E").expect("static");
        for tok in [&predicate_token, &entity_token] {
            if entities.contains(tok) || variables.contains(tok) {
                return Err(SketchError::AbstractTokenCollision(tok.clone()));
            }
        }
        // A predicate literally named "P" maps to itself, which is fine.
        let mut all = variables.clone();
        all.insert(predicate_token.clone());
        all.insert(entity_token.clone());
        let abstract_vocab =
            Vocabulary::new(all, variables.clone()).expect("variables ⊆ all by construction");
        Ok(AbstractionMap {
            predicates,
            entities,
            variables,
            predicate_token,
            entity_token,
            abstract_vocab,
        })
    }

    /// Applies `f` to one token. Idempotent on its image: abstract tokens and
    /// variables map to themselves.
    pub fn apply(&self, token: &Label) -> Result<Label, SketchError> {
        if self.predicates.contains(token) {
            Ok(self.predicate_token.clone())
        } else if self.entities.contains(token) {
            Ok(self.entity_token.clone())
        } else if self.variables.contains(token)
            || *token == self.predicate_token
            || *token == self.entity_token
        {
            Ok(token.clone())
        } else {
            Err(SketchError::UnknownToken(token.clone()))
        }
    }

    /// Primitives are the tokens the abstraction does not fix.
    pub fn is_primitive(&self, token: &Label) -> bool {
        self.predicates.contains(token) || self.entities.contains(token)
    }

    pub fn predicates(&self) -> &BTreeSet<Label> {
        &self.predicates
    }

    pub fn entities(&self) -> &BTreeSet<Label> {
        &self.entities
    }

    pub fn variables(&self) -> &BTreeSet<Label> {
        &self.variables
    }

    pub fn predicate_token(&self) -> &Label {
        &self.predicate_token
    }

    pub fn entity_token(&self) -> &Label {
        &self.entity_token
    }

    pub fn abstract_vocab(&self) -> &Vocabulary {
        &self.abstract_vocab
    }

    /// True for labels that denote a slot rather than a concrete token.
    pub fn is_slot_label(&self, label: &Label) -> bool {
        *label == self.predicate_token || *label == self.entity_token
    }

    /// Concrete tokens that may fill a slot with this label.
    pub fn fillers(&self, slot_label: &Label) -> Option<&BTreeSet<Label>> {
        if *slot_label == self.predicate_token {
            Some(&self.predicates)
        } else if *slot_label == self.entity_token {
            Some(&self.entities)
        } else {
            None
        }
    }
}

/// An abstract semantic poset plus the vertices that act as slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sketch {
    poset: SemanticPoset,
    slot_vertices: BTreeSet<VertexId>,
}

impl Sketch {
    pub fn poset(&self) -> &SemanticPoset {
        &self.poset
    }

    pub fn slot_vertices(&self) -> &BTreeSet<VertexId> {
        &self.slot_vertices
    }

    /// Wraps an already-abstract poset, recomputing the slot set.
    pub fn from_abstract_poset(poset: SemanticPoset, map: &AbstractionMap) -> Self {
        let slot_vertices =
            poset.vertices().filter(|&v| map.is_slot_label(poset.label(v))).collect();
        Sketch { poset, slot_vertices }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MergeMode {
    #[default]
    InNeighbor,
    Strict,
}

/// Extracts the sketch of a valid semantic poset in the default merge mode.
pub fn extract_sketch(poset: &SemanticPoset, map: &AbstractionMap) -> Result<Sketch, SketchError> {
    extract_sketch_with_mode(poset, map, MergeMode::InNeighbor)
}

pub fn extract_sketch_with_mode(
    poset: &SemanticPoset,
    map: &AbstractionMap,
    mode: MergeMode,
) -> Result<Sketch, SketchError> {
    let report = poset.validate();
    if !report.ok {
        return Err(SketchError::InvalidPoset(report));
    }
    let abstract_poset = match mode {
        MergeMode::InNeighbor => {
            let mut abstract_paths: Vec<Vec<Label>> = Vec::new();
            for path in poset.maximal_paths()? {
                let mapped = path
                    .label_seq()
                    .iter()
                    .map(|l| map.apply(l))
                    .collect::<Result<Vec<Label>, SketchError>>()?;
                abstract_paths.push(mapped);
            }
            abstract_paths.sort();
            abstract_paths.dedup();
            match reconstruct(&abstract_paths, map.abstract_vocab()) {
                Ok(p) => p,
                Err(PosetError::InconsistentPaths { reason }) => {
                    return Err(SketchError::Unrepresentable { reason })
                }
                Err(e) => return Err(e.into()),
            }
        }
        MergeMode::Strict => strict_fixpoint(poset, map)?,
    };
    Ok(Sketch::from_abstract_poset(abstract_poset, map))
}

/// The literal merge rule: relabel by `f`, then repeatedly delete a vertex
/// whose label, in-neighbor set and out-neighbor set all equal another's.
/// With equal neighborhoods the duplicate's edges add nothing, so a merge is
/// a deletion. Scans in (label, id) order until no pair qualifies.
fn strict_fixpoint(
    poset: &SemanticPoset,
    map: &AbstractionMap,
) -> Result<SemanticPoset, SketchError> {
    let n = poset.vertex_count();
    let mut labels: Vec<Label> = Vec::with_capacity(n);
    for v in poset.vertices() {
        labels.push(map.apply(poset.label(v))?);
    }
    let mut alive: Vec<bool> = vec![true; n];
    let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut children: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(src, dst) in poset.edges() {
        children[src.index()].insert(dst.index());
        parents[dst.index()].insert(src.index());
    }

    loop {
        let mut merged = false;
        let mut order: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
        order.sort_by(|&a, &b| labels[a].cmp(&labels[b]).then(a.cmp(&b)));
        'scan: for (i_pos, &i) in order.iter().enumerate() {
            for &j in &order[i_pos + 1..] {
                if labels[i] != labels[j] {
                    break;
                }
                if parents[i] == parents[j] && children[i] == children[j] {
                    alive[j] = false;
                    for &p in parents[j].clone().iter() {
                        children[p].remove(&j);
                    }
                    for &c in children[j].clone().iter() {
                        parents[c].remove(&j);
                    }
                    merged = true;
                    break 'scan;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut remap: BTreeMap<usize, u32> = BTreeMap::new();
    let mut out_labels = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if alive[i] {
            remap.insert(i, out_labels.len() as u32);
            out_labels.push(label.clone());
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        if alive[i] {
            for &c in &children[i] {
                edges.push((VertexId(remap[&i]), VertexId(remap[&c])));
            }
        }
    }
    let sketch = SemanticPoset::new(out_labels, edges, map.abstract_vocab().clone())?;
    let report = sketch.validate();
    if !report.ok {
        return Err(SketchError::InvalidSketch(report));
    }
    Ok(sketch)
}

/// A maximal sketch path with the positions of its slot vertices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlotPath {
    pub labels: Vec<Label>,
    pub slots: Vec<usize>,
}

/// Maximal paths of the sketch annotated with slot positions, sorted.
pub fn slot_paths(sketch: &Sketch, map: &AbstractionMap) -> Result<Vec<SlotPath>, SketchError> {
    let mut out = Vec::new();
    for path in sketch.poset().maximal_paths()? {
        let labels = path.label_seq().to_vec();
        let slots = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| map.is_slot_label(l))
            .map(|(i, _)| i)
            .collect();
        out.push(SlotPath { labels, slots });
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::test_fixtures::{example_poset, example_vocab, labels, lbl};
    use crate::query::{parse_query, query_to_poset};

    fn example_map() -> AbstractionMap {
        AbstractionMap::predicate_entity(&example_vocab()).unwrap()
    }

    fn path_set(sketch: &Sketch) -> BTreeSet<Vec<Label>> {
        sketch
            .poset()
            .maximal_paths()
            .unwrap()
            .into_iter()
            .map(|p| p.label_seq().to_vec())
            .collect()
    }

    fn vocab_and_map(preds: &[&str], terms: &[&str]) -> (Vocabulary, AbstractionMap) {
        let mut all = labels(preds);
        all.extend(labels(terms));
        let vocab = Vocabulary::new(all, labels(terms)).unwrap();
        let map = AbstractionMap::predicate_entity(&vocab).unwrap();
        (vocab, map)
    }

    #[test]
    fn abstract_token_examples() {
        let map = example_map();
        assert_eq!(map.apply(&lbl("INFLUENCE")).unwrap(), lbl("P"));
        assert_eq!(map.apply(&lbl("Maxim_Gorky")).unwrap(), lbl("E"));
        assert_eq!(map.apply(&lbl("x0")).unwrap(), lbl("x0"));
        assert!(matches!(map.apply(&lbl("nope")), Err(SketchError::UnknownToken(_))));
    }

    #[test]
    fn abstraction_is_idempotent_on_image() {
        let map = example_map();
        for tok in example_vocab().all_tokens() {
            let once = map.apply(tok).unwrap();
            assert_eq!(map.apply(&once).unwrap(), once);
        }
    }

    #[test]
    fn example_sketch_collapses_both_branches() {
        let sketch = extract_sketch(&example_poset(), &example_map()).unwrap();
        assert_eq!(path_set(&sketch), BTreeSet::from([labels(&["x0", "P", "E"])]));
        assert!(sketch.poset().validate().ok);
        assert_eq!(sketch.slot_vertices().len(), 2);
    }

    #[test]
    fn single_clause_sketch() {
        let (vocab, map) = vocab_and_map(&["p1"], &["x0", "e1"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 }").unwrap();
        let poset = query_to_poset(&q, &vocab).unwrap();
        let sketch = extract_sketch(&poset, &map).unwrap();
        assert_eq!(path_set(&sketch), BTreeSet::from([labels(&["x0", "P", "E"])]));
    }

    #[test]
    fn chain_and_branch_sketch() {
        // (x0,p1,e1), (x0,p2,x1), (x1,p3,e2): branch collapses with the chain
        // head but the variable keeps the chain path distinct.
        let (vocab, map) = vocab_and_map(&["p1", "p2", "p3"], &["x0", "x1", "e1", "e2"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 ?x1 . ?x1 p3 e2 }").unwrap();
        let poset = query_to_poset(&q, &vocab).unwrap();
        let sketch = extract_sketch(&poset, &map).unwrap();
        assert_eq!(
            path_set(&sketch),
            BTreeSet::from([labels(&["x0", "P", "E"]), labels(&["x0", "P", "x1", "P", "E"])])
        );
        assert!(sketch.poset().validate().ok);
    }

    #[test]
    fn extract_sketch_is_idempotent() {
        for text in [
            "SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 ?x1 . ?x1 p3 e2 }",
            "SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 e1 }",
        ] {
            let (vocab, map) = vocab_and_map(&["p1", "p2", "p3"], &["x0", "x1", "e1", "e2"]);
            let q = parse_query(text).unwrap();
            let poset = query_to_poset(&q, &vocab).unwrap();
            let once = extract_sketch(&poset, &map).unwrap();
            let twice = extract_sketch(once.poset(), &map).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn sketch_is_invariant_under_primitive_renaming() {
        let (vocab, map) = vocab_and_map(&["p1", "p2", "p3"], &["x0", "x1", "e1", "e2"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 ?x1 . ?x1 p3 e2 }").unwrap();
        let renamed =
            parse_query("SELECT ?x0 WHERE { ?x0 p3 e2 . ?x0 p1 ?x1 . ?x1 p2 e1 }").unwrap();
        let a = extract_sketch(&query_to_poset(&q, &vocab).unwrap(), &map).unwrap();
        let b = extract_sketch(&query_to_poset(&renamed, &vocab).unwrap(), &map).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_entity_tail_splits_cleanly() {
        // Two heads pointing at the same entity: the abstract E is split per
        // branch so the sketch still validates.
        let (vocab, map) = vocab_and_map(&["p1", "p2"], &["x0", "x1", "e1"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x1 p2 e1 }").unwrap();
        let poset = query_to_poset(&q, &vocab).unwrap();
        let sketch = extract_sketch(&poset, &map).unwrap();
        assert!(sketch.poset().validate().ok);
        assert_eq!(
            path_set(&sketch),
            BTreeSet::from([labels(&["x0", "P", "E"]), labels(&["x1", "P", "E"])])
        );
    }

    #[test]
    fn entity_chain_sibling_of_plain_entity_is_unrepresentable() {
        // e2 has its own outgoing relation while e1 is a plain sibling tail:
        // the abstract image of one maximal path is a prefix of another, and
        // no semantic poset has such a maximal-path set.
        let (vocab, map) = vocab_and_map(&["p1", "p2", "p3"], &["x0", "e1", "e2", "e3"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 e2 . e2 p3 e3 }").unwrap();
        let poset = query_to_poset(&q, &vocab).unwrap();
        assert!(poset.validate().ok);
        let err = extract_sketch(&poset, &map).unwrap_err();
        assert!(matches!(err, SketchError::Unrepresentable { .. }), "got {err:?}");
    }

    #[test]
    fn strict_mode_merges_shared_tail_diamond() {
        let (vocab, map) = vocab_and_map(&["p1", "p2"], &["x0", "e1"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 e1 }").unwrap();
        let poset = query_to_poset(&q, &vocab).unwrap();
        // In-neighbor mode and strict mode agree here: the two predicate
        // vertices share both neighborhoods after relabeling.
        let strict = extract_sketch_with_mode(&poset, &map, MergeMode::Strict).unwrap();
        assert_eq!(path_set(&strict), BTreeSet::from([labels(&["x0", "P", "E"])]));
    }

    #[test]
    fn strict_mode_deadlocks_on_parallel_branches() {
        // The literal both-neighborhood rule cannot merge the two branches of
        // the running example: their entity tails differ, so the predicate
        // vertices never equalize, and the relabeled copy breaks property 1.
        let err = extract_sketch_with_mode(&example_poset(), &example_map(), MergeMode::Strict)
            .unwrap_err();
        assert!(matches!(err, SketchError::InvalidSketch(_)), "got {err:?}");
    }

    #[test]
    fn slot_paths_examples() {
        let sketch = extract_sketch(&example_poset(), &example_map()).unwrap();
        let paths = slot_paths(&sketch, &example_map()).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].labels, labels(&["x0", "P", "E"]));
        assert_eq!(paths[0].slots, vec![1, 2]);

        let (vocab, map) = vocab_and_map(&["p1", "p2", "p3"], &["x0", "x1", "e1", "e2"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 ?x1 . ?x1 p3 e2 }").unwrap();
        let sketch = extract_sketch(&query_to_poset(&q, &vocab).unwrap(), &map).unwrap();
        let paths = slot_paths(&sketch, &map).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].slots, vec![1, 2]);
        assert_eq!(paths[1].labels, labels(&["x0", "P", "x1", "P", "E"]));
        assert_eq!(paths[1].slots, vec![1, 3, 4]);
    }

    #[test]
    fn single_vertex_sketch_has_no_slots() {
        let vocab = Vocabulary::new(labels(&["x0"]), labels(&["x0"])).unwrap();
        let map = AbstractionMap::predicate_entity(&vocab).unwrap();
        let poset = SemanticPoset::new(labels(&["x0"]), [], vocab).unwrap();
        let sketch = extract_sketch(&poset, &map).unwrap();
        let paths = slot_paths(&sketch, &map).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths[0].slots.is_empty());
    }

    #[test]
    fn path_set_abstraction_soundness() {
        let (vocab, map) = vocab_and_map(&["p1", "p2"], &["x0", "x1", "e1", "e2"]);
        let q = parse_query("SELECT ?x0 WHERE { ?x0 p1 e1 . ?x0 p2 e2 . ?x1 p1 e1 }").unwrap();
        let poset = query_to_poset(&q, &vocab).unwrap();
        let sketch = extract_sketch(&poset, &map).unwrap();
        let mapped: BTreeSet<Vec<Label>> = poset
            .maximal_paths()
            .unwrap()
            .into_iter()
            .map(|p| p.label_seq().iter().map(|l| map.apply(l).unwrap()).collect())
            .collect();
        assert_eq!(mapped, path_set(&sketch));
    }
}
