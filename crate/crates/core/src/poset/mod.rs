//! Semantic posets: labeled Hasse diagrams with a once-only vocabulary.
//!
//! A semantic poset is a DAG whose edges form a covering relation and whose
//! labeling satisfies two properties:
//!
//! 1. children of the same vertex carry pairwise distinct labels;
//! 2. a vertex may have more than one incoming edge only if its label belongs
//!    to the once-only vocabulary, and such a label appears on exactly one
//!    vertex of the poset.
//!
//! Together these make the label sequence of a traversal path a unique key
//! for the path, which is what the whole decoding pipeline relies on.
//! All types here are immutable after construction and the operations are
//! pure functions.

mod serialize;

pub use serialize::PosetJson;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A token from the output vocabulary. Non-empty, contains no whitespace.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("label must be non-empty")]
    Empty,
    #[error("label {0:?} contains whitespace")]
    Whitespace(String),
}

impl Label {
    pub fn new(text: impl Into<String>) -> Result<Self, LabelError> {
        let text = text.into();
        if text.is_empty() {
            return Err(LabelError::Empty);
        }
        if text.chars().any(char::is_whitespace) {
            return Err(LabelError::Whitespace(text));
        }
        Ok(Label(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label({})", self.0)
    }
}

impl TryFrom<String> for Label {
    type Error = LabelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Label::new(s)
    }
}

impl TryFrom<&str> for Label {
    type Error = LabelError;
    fn try_from(s: &str) -> Result<Self, Self::Error> {
        Label::new(s)
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.0
    }
}

/// The output vocabulary `V` together with its once-only subset `V̂`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    all_tokens: BTreeSet<Label>,
    once_only: BTreeSet<Label>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("once-only token {0} is not part of the vocabulary")]
    OnceOnlyNotInVocabulary(Label),
}

impl Vocabulary {
    pub fn new(
        all_tokens: impl IntoIterator<Item = Label>,
        once_only: impl IntoIterator<Item = Label>,
    ) -> Result<Self, VocabularyError> {
        let all_tokens: BTreeSet<Label> = all_tokens.into_iter().collect();
        let once_only: BTreeSet<Label> = once_only.into_iter().collect();
        if let Some(tok) = once_only.difference(&all_tokens).next() {
            return Err(VocabularyError::OnceOnlyNotInVocabulary(tok.clone()));
        }
        Ok(Vocabulary { all_tokens, once_only })
    }

    pub fn all_tokens(&self) -> &BTreeSet<Label> {
        &self.all_tokens
    }

    pub fn once_only(&self) -> &BTreeSet<Label> {
        &self.once_only
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.all_tokens.contains(label)
    }

    pub fn is_once_only(&self, label: &Label) -> bool {
        self.once_only.contains(label)
    }
}

/// Opaque vertex handle. Ids are assigned densely at insertion; all poset
/// semantics live in labels, ids only tie the structure together.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub(crate) u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A labeled digraph candidate for a semantic poset.
///
/// Construction accepts any labeled digraph; [`SemanticPoset::validate`]
/// reports which semantic-poset invariants hold. Operations that require a
/// valid poset check the precondition and return [`PosetError::InvalidPoset`]
/// otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticPoset {
    labels: Vec<Label>,
    edges: BTreeSet<(VertexId, VertexId)>,
    vocab: Vocabulary,
    children: Vec<Vec<VertexId>>,
    parents: Vec<Vec<VertexId>>,
}

/// Which invariant a structure violates, with the offending ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// The edge relation has a directed cycle through these vertices.
    Cycle { vertices: Vec<VertexId> },
    /// The edge is implied by a longer directed path, so the relation is not
    /// a covering relation (the structure is not a Hasse diagram).
    NotCovering { src: VertexId, dst: VertexId },
    /// Two children of `parent` share a label.
    Property1 { parent: VertexId, children: Vec<VertexId> },
    /// `vertex` has in-degree ≥ 2 but its label is not once-only.
    Property2 { vertex: VertexId },
    /// A once-only label appears on more than one vertex.
    OnceOnlyDuplicate { label: Label, vertices: Vec<VertexId> },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Cycle { .. } => "Cycle",
            Violation::NotCovering { .. } => "NotCovering",
            Violation::Property1 { .. } => "Property1",
            Violation::Property2 { .. } => "Property2",
            Violation::OnceOnlyDuplicate { .. } => "OnceOnlyDuplicate",
        }
    }
}

/// Result of [`SemanticPoset::validate`]: `ok` iff `violations` is empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Error)]
pub enum PosetError {
    #[error("edge endpoint {0:?} does not name a vertex")]
    UnknownVertex(VertexId),
    #[error("structure is not a valid semantic poset: {0:?}")]
    InvalidPoset(ValidationReport),
    #[error("path is not a prefix path of this poset")]
    PathNotInPoset,
    #[error("reconstruct was given an empty label sequence")]
    EmptyPath,
    #[error("label {0} is not in the vocabulary")]
    UnknownLabel(Label),
    #[error("paths cannot be merged into a valid semantic poset: {reason}")]
    InconsistentPaths { reason: String },
}

/// A chain of covering edges starting at a lower-bound element.
///
/// Within one valid poset the label sequence uniquely identifies the vertex
/// sequence; both are kept so callers can work with either view. The
/// zero-length path is represented by empty sequences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraversalPath {
    vertex_seq: Vec<VertexId>,
    label_seq: Vec<Label>,
}

impl TraversalPath {
    pub fn empty() -> Self {
        TraversalPath { vertex_seq: Vec::new(), label_seq: Vec::new() }
    }

    pub fn vertex_seq(&self) -> &[VertexId] {
        &self.vertex_seq
    }

    pub fn label_seq(&self) -> &[Label] {
        &self.label_seq
    }

    pub fn len(&self) -> usize {
        self.vertex_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_seq.is_empty()
    }

    pub fn last_vertex(&self) -> Option<VertexId> {
        self.vertex_seq.last().copied()
    }
}

impl SemanticPoset {
    /// Builds a labeled digraph. Edges must reference declared vertices;
    /// nothing else is checked here — see [`SemanticPoset::validate`].
    pub fn new(
        labels: Vec<Label>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
        vocab: Vocabulary,
    ) -> Result<Self, PosetError> {
        let n = labels.len();
        let edges: BTreeSet<(VertexId, VertexId)> = edges.into_iter().collect();
        for &(src, dst) in &edges {
            if src.index() >= n {
                return Err(PosetError::UnknownVertex(src));
            }
            if dst.index() >= n {
                return Err(PosetError::UnknownVertex(dst));
            }
        }
        let mut children = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for &(src, dst) in &edges {
            children[src.index()].push(dst);
            parents[dst.index()].push(src);
        }
        Ok(SemanticPoset { labels, edges, vocab, children, parents })
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.labels.len() as u32).map(VertexId)
    }

    pub fn label(&self, v: VertexId) -> &Label {
        &self.labels[v.index()]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn edges(&self) -> &BTreeSet<(VertexId, VertexId)> {
        &self.edges
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v.index()]
    }

    pub fn parents(&self, v: VertexId) -> &[VertexId] {
        &self.parents[v.index()]
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.parents[v.index()].len()
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.children[v.index()].len()
    }

    /// Vertices with in-degree 0, in id order.
    pub fn lower_bounds(&self) -> Vec<VertexId> {
        self.vertices().filter(|&v| self.in_degree(v) == 0).collect()
    }

    /// Checks every semantic-poset invariant and reports all violations.
    /// Accepts arbitrary labeled digraph input; nothing is thrown.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let topo = self.topological_order();
        let acyclic = topo.len() == self.vertex_count();
        if !acyclic {
            let in_topo: BTreeSet<VertexId> = topo.iter().copied().collect();
            let vertices: Vec<VertexId> =
                self.vertices().filter(|v| !in_topo.contains(v)).collect();
            violations.push(Violation::Cycle { vertices });
        }

        // Covering check is only meaningful on a DAG: an edge (a, b) must not
        // be implied by a longer directed path from a to b.
        if acyclic {
            for &(src, dst) in &self.edges {
                if self.reachable_avoiding_edge(src, dst) {
                    violations.push(Violation::NotCovering { src, dst });
                }
            }
        }

        // Property 1: sibling labels pairwise distinct.
        for v in self.vertices() {
            let mut by_label: BTreeMap<&Label, Vec<VertexId>> = BTreeMap::new();
            for &c in self.children(v) {
                by_label.entry(self.label(c)).or_default().push(c);
            }
            for (_, group) in by_label {
                if group.len() > 1 {
                    violations.push(Violation::Property1 { parent: v, children: group });
                }
            }
        }

        // Property 2: multi-parent vertices must carry once-only labels.
        for v in self.vertices() {
            if self.in_degree(v) >= 2 && !self.vocab.is_once_only(self.label(v)) {
                violations.push(Violation::Property2 { vertex: v });
            }
        }

        // Once-only labels appear on at most one vertex.
        let mut by_label: BTreeMap<&Label, Vec<VertexId>> = BTreeMap::new();
        for v in self.vertices() {
            by_label.entry(self.label(v)).or_default().push(v);
        }
        for (label, group) in by_label {
            if group.len() > 1 && self.vocab.is_once_only(label) {
                violations.push(Violation::OnceOnlyDuplicate {
                    label: label.clone(),
                    vertices: group,
                });
            }
        }

        ValidationReport { ok: violations.is_empty(), violations }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().ok
    }

    fn require_valid(&self) -> Result<(), PosetError> {
        let report = self.validate();
        if report.ok {
            Ok(())
        } else {
            Err(PosetError::InvalidPoset(report))
        }
    }

    /// Kahn topological order; shorter than `vertex_count` iff cyclic.
    fn topological_order(&self) -> Vec<VertexId> {
        let mut in_deg: Vec<usize> = self.vertices().map(|v| self.in_degree(v)).collect();
        let mut queue: VecDeque<VertexId> =
            self.vertices().filter(|v| in_deg[v.index()] == 0).collect();
        let mut order = Vec::with_capacity(self.vertex_count());
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in self.children(v) {
                in_deg[c.index()] -= 1;
                if in_deg[c.index()] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    /// Is `dst` reachable from `src` without using the direct edge src→dst?
    fn reachable_avoiding_edge(&self, src: VertexId, dst: VertexId) -> bool {
        let mut stack: Vec<VertexId> =
            self.children(src).iter().copied().filter(|&c| c != dst).collect();
        let mut seen: BTreeSet<VertexId> = stack.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if v == dst {
                return true;
            }
            for &c in self.children(v) {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Children of `v` in label order. Well-ordered on valid posets where
    /// sibling labels are distinct.
    fn children_by_label(&self, v: VertexId) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self.children(v).to_vec();
        out.sort_by(|a, b| self.label(*a).cmp(self.label(*b)).then(a.cmp(b)));
        out
    }

    /// Every traversal path whose final vertex has out-degree 0, sorted by
    /// label sequence. Requires a valid poset.
    pub fn maximal_paths(&self) -> Result<Vec<TraversalPath>, PosetError> {
        self.require_valid()?;
        let mut out = Vec::new();
        for start in self.lower_bounds() {
            self.collect_paths(start, &mut Vec::new(), &mut |poset, vs| {
                if poset.out_degree(*vs.last().expect("non-empty")) == 0 {
                    out.push(poset.path_from_vertices(vs));
                }
            });
        }
        out.sort_by(|a, b| a.label_seq.cmp(&b.label_seq).then(a.vertex_seq.cmp(&b.vertex_seq)));
        out.dedup();
        Ok(out)
    }

    /// The zero-length path plus every prefix of every maximal path,
    /// deduplicated by vertex sequence and sorted by label sequence.
    pub fn prefix_paths(&self) -> Result<Vec<TraversalPath>, PosetError> {
        self.require_valid()?;
        let mut out = vec![TraversalPath::empty()];
        for start in self.lower_bounds() {
            self.collect_paths(start, &mut Vec::new(), &mut |poset, vs| {
                out.push(poset.path_from_vertices(vs));
            });
        }
        out.sort_by(|a, b| a.label_seq.cmp(&b.label_seq).then(a.vertex_seq.cmp(&b.vertex_seq)));
        out.dedup();
        Ok(out)
    }

    fn collect_paths(
        &self,
        v: VertexId,
        prefix: &mut Vec<VertexId>,
        visit: &mut impl FnMut(&Self, &[VertexId]),
    ) {
        prefix.push(v);
        visit(self, prefix);
        for c in self.children_by_label(v) {
            self.collect_paths(c, prefix, visit);
        }
        prefix.pop();
    }

    fn path_from_vertices(&self, vs: &[VertexId]) -> TraversalPath {
        TraversalPath {
            vertex_seq: vs.to_vec(),
            label_seq: vs.iter().map(|&v| self.label(v).clone()).collect(),
        }
    }

    /// Finds the prefix path with this label sequence, if any. Well-defined
    /// on valid posets because sibling labels are distinct.
    pub fn path_by_labels(&self, labels: &[Label]) -> Option<TraversalPath> {
        if labels.is_empty() {
            return Some(TraversalPath::empty());
        }
        let mut current: Option<VertexId> = None;
        let mut vertex_seq = Vec::with_capacity(labels.len());
        for label in labels {
            let next = match current {
                None => self
                    .lower_bounds()
                    .into_iter()
                    .find(|&v| self.label(v) == label),
                Some(v) => self.children(v).iter().copied().find(|&c| self.label(c) == label),
            }?;
            vertex_seq.push(next);
            current = Some(next);
        }
        Some(TraversalPath { vertex_seq, label_seq: labels.to_vec() })
    }

    /// Labels that can extend `path`: labels of all lower bounds for the
    /// zero-length path, labels of covering successors of the last vertex
    /// otherwise. Empty exactly when the last vertex is maximal.
    pub fn next_labels(&self, path: &TraversalPath) -> Result<BTreeSet<Label>, PosetError> {
        self.check_prefix_path(path)?;
        let successors: Vec<VertexId> = match path.last_vertex() {
            None => self.lower_bounds(),
            Some(v) => self.children(v).to_vec(),
        };
        Ok(successors.into_iter().map(|v| self.label(v).clone()).collect())
    }

    fn check_prefix_path(&self, path: &TraversalPath) -> Result<(), PosetError> {
        if path.is_empty() {
            return Ok(());
        }
        let first = path.vertex_seq[0];
        if first.index() >= self.vertex_count() || self.in_degree(first) != 0 {
            return Err(PosetError::PathNotInPoset);
        }
        for pair in path.vertex_seq.windows(2) {
            if !self.edges.contains(&(pair[0], pair[1])) {
                return Err(PosetError::PathNotInPoset);
            }
        }
        for (v, l) in path.vertex_seq.iter().zip(&path.label_seq) {
            if self.label(*v) != l {
                return Err(PosetError::PathNotInPoset);
            }
        }
        Ok(())
    }

    /// True iff both posets are valid and share the same set of maximal-path
    /// label sequences. For valid semantic posets this coincides with
    /// label-preserving isomorphism.
    pub fn canonical_equal(&self, other: &SemanticPoset) -> Result<bool, PosetError> {
        let mine: BTreeSet<Vec<Label>> =
            self.maximal_paths()?.into_iter().map(|p| p.label_seq).collect();
        let theirs: BTreeSet<Vec<Label>> =
            other.maximal_paths()?.into_iter().map(|p| p.label_seq).collect();
        Ok(mine == theirs)
    }
}

/// Deterministically rebuilds a semantic poset from a set of maximal-path
/// label sequences.
///
/// Each sequence is walked from a virtual start vertex. A label in the
/// once-only vocabulary resolves to the globally unique vertex with that
/// label (created on first use); any other label resolves to the existing
/// child of the current vertex with that label, or creates a fresh one. The
/// virtual start is stripped from the result.
///
/// The output is independent of the iteration order of `paths` (sequences are
/// processed in sorted order and ids assigned in creation order, so equal
/// path sets produce structurally identical posets). The merged structure is
/// validated and its maximal paths are required to equal the input set;
/// anything else is reported as [`PosetError::InconsistentPaths`].
pub fn reconstruct(
    paths: &[Vec<Label>],
    vocab: &Vocabulary,
) -> Result<SemanticPoset, PosetError> {
    let mut sorted: Vec<&Vec<Label>> = paths.iter().collect();
    sorted.sort();
    sorted.dedup();

    for path in &sorted {
        if path.is_empty() {
            return Err(PosetError::EmptyPath);
        }
        for label in path.iter() {
            if !vocab.contains(label) {
                return Err(PosetError::UnknownLabel(label.clone()));
            }
        }
    }

    // Vertex 0 is the virtual start; real ids are shifted down on strip.
    let mut labels: Vec<Option<Label>> = vec![None];
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut once_only_at: BTreeMap<Label, usize> = BTreeMap::new();

    for path in &sorted {
        let mut current = 0usize;
        for label in path.iter() {
            let existing = if vocab.is_once_only(label) {
                once_only_at.get(label).copied()
            } else {
                children[current]
                    .iter()
                    .copied()
                    .find(|&c| labels[c].as_ref() == Some(label))
            };
            let next = match existing {
                Some(v) => v,
                None => {
                    let v = labels.len();
                    labels.push(Some(label.clone()));
                    children.push(Vec::new());
                    if vocab.is_once_only(label) {
                        once_only_at.insert(label.clone(), v);
                    }
                    v
                }
            };
            if edges.insert((current, next)) {
                children[current].push(next);
            }
            current = next;
        }
    }

    // Strip the virtual start: drop vertex 0 and every edge out of it.
    let real_labels: Vec<Label> = labels.into_iter().flatten().collect();
    let real_edges = edges
        .into_iter()
        .filter(|&(src, _)| src != 0)
        .map(|(src, dst)| (VertexId(src as u32 - 1), VertexId(dst as u32 - 1)));
    let poset = SemanticPoset::new(real_labels, real_edges, vocab.clone())?;

    let report = poset.validate();
    if !report.ok {
        return Err(PosetError::InconsistentPaths {
            reason: format!(
                "merged structure violates {}",
                report
                    .violations
                    .iter()
                    .map(Violation::kind)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect::<Vec<_>>()
                    .join("+")
            ),
        });
    }

    let produced: BTreeSet<Vec<Label>> = poset
        .maximal_paths()
        .expect("validated above")
        .into_iter()
        .map(|p| p.label_seq)
        .collect();
    let wanted: BTreeSet<Vec<Label>> = sorted.iter().map(|p| (*p).clone()).collect();
    if produced != wanted {
        return Err(PosetError::InconsistentPaths {
            reason: "merged structure does not reproduce the input path set".to_string(),
        });
    }

    Ok(poset)
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::*;
    use super::*;

    fn label_seqs(paths: &[TraversalPath]) -> BTreeSet<Vec<Label>> {
        paths.iter().map(|p| p.label_seq().to_vec()).collect()
    }

    /// Brute-force path enumeration oracle: every DFS walk from an in-degree-0
    /// vertex, independent of the production traversal code.
    fn brute_force_maximal_paths(poset: &SemanticPoset) -> BTreeSet<Vec<Label>> {
        fn walk(
            poset: &SemanticPoset,
            v: VertexId,
            prefix: &mut Vec<VertexId>,
            out: &mut BTreeSet<Vec<Label>>,
        ) {
            prefix.push(v);
            if poset.children(v).is_empty() {
                out.insert(prefix.iter().map(|&u| poset.label(u).clone()).collect());
            }
            for &c in poset.children(v) {
                walk(poset, c, prefix, out);
            }
            prefix.pop();
        }
        let mut out = BTreeSet::new();
        for v in poset.lower_bounds() {
            walk(poset, v, &mut Vec::new(), &mut out);
        }
        out
    }

    #[test]
    fn example_poset_is_valid() {
        let report = example_poset().validate();
        assert!(report.ok, "unexpected violations: {:?}", report.violations);
    }

    #[test]
    fn duplicate_sibling_labels_violate_property1() {
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE", "INFLUENCE"]),
            [(VertexId(0), VertexId(1)), (VertexId(0), VertexId(2))],
            example_vocab(),
        )
        .unwrap();
        let report = poset.validate();
        assert!(!report.ok);
        assert!(matches!(report.violations[..], [Violation::Property1 { .. }]));
    }

    #[test]
    fn multi_parent_predicate_violates_property2() {
        // Two variables both covering the same predicate-labeled vertex.
        let poset = SemanticPoset::new(
            labels(&["x0", "x1", "INFLUENCE"]),
            [(VertexId(0), VertexId(2)), (VertexId(1), VertexId(2))],
            example_vocab(),
        )
        .unwrap();
        let report = poset.validate();
        assert!(!report.ok);
        assert!(matches!(report.violations[..], [Violation::Property2 { vertex }] if vertex == VertexId(2)));
    }

    #[test]
    fn cycle_is_reported() {
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE"]),
            [(VertexId(0), VertexId(1)), (VertexId(1), VertexId(0))],
            example_vocab(),
        )
        .unwrap();
        let report = poset.validate();
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Cycle { .. })));
    }

    #[test]
    fn transitive_edge_is_not_covering() {
        // x0 -> INFLUENCE -> Maxim_Gorky plus the shortcut x0 -> Maxim_Gorky.
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE", "Maxim_Gorky"]),
            [
                (VertexId(0), VertexId(1)),
                (VertexId(1), VertexId(2)),
                (VertexId(0), VertexId(2)),
            ],
            example_vocab(),
        )
        .unwrap();
        let report = poset.validate();
        assert!(!report.ok);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotCovering { src, dst }
                if *src == VertexId(0) && *dst == VertexId(2))));
    }

    #[test]
    fn once_only_duplicate_is_reported() {
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE", "Maxim_Gorky", "Maxim_Gorky"]),
            [
                (VertexId(0), VertexId(1)),
                (VertexId(1), VertexId(2)),
            ],
            example_vocab(),
        )
        .unwrap();
        let report = poset.validate();
        assert!(!report.ok);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::OnceOnlyDuplicate { .. })));
    }

    #[test]
    fn maximal_paths_of_example() {
        // Expected set computed by the brute-force DFS oracle over the
        // five-vertex DAG.
        let poset = example_poset();
        let expected = brute_force_maximal_paths(&poset);
        assert_eq!(
            expected,
            BTreeSet::from([
                labels(&["x0", "INFLUENCE", "Maxim_Gorky"]),
                labels(&["x0", "MARRY", "Siri_von_Essen"]),
            ])
        );
        assert_eq!(label_seqs(&poset.maximal_paths().unwrap()), expected);
    }

    #[test]
    fn maximal_paths_single_vertex() {
        let poset =
            SemanticPoset::new(labels(&["x0"]), [], example_vocab()).unwrap();
        assert_eq!(
            label_seqs(&poset.maximal_paths().unwrap()),
            BTreeSet::from([labels(&["x0"])])
        );
    }

    #[test]
    fn maximal_paths_diamond() {
        // x0 -> INFLUENCE -> Maxim_Gorky, x0 -> MARRY -> Maxim_Gorky: the
        // once-only entity is shared by both branches.
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE", "MARRY", "Maxim_Gorky"]),
            [
                (VertexId(0), VertexId(1)),
                (VertexId(0), VertexId(2)),
                (VertexId(1), VertexId(3)),
                (VertexId(2), VertexId(3)),
            ],
            example_vocab(),
        )
        .unwrap();
        let expected = brute_force_maximal_paths(&poset);
        assert_eq!(
            expected,
            BTreeSet::from([
                labels(&["x0", "INFLUENCE", "Maxim_Gorky"]),
                labels(&["x0", "MARRY", "Maxim_Gorky"]),
            ])
        );
        assert_eq!(label_seqs(&poset.maximal_paths().unwrap()), expected);
    }

    #[test]
    fn maximal_paths_rejects_invalid_poset() {
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE"]),
            [(VertexId(0), VertexId(1)), (VertexId(1), VertexId(0))],
            example_vocab(),
        )
        .unwrap();
        assert!(matches!(poset.maximal_paths(), Err(PosetError::InvalidPoset(_))));
    }

    #[test]
    fn prefix_paths_of_example() {
        // Prefixes of the two maximal paths plus the zero-length path: 6 total.
        let poset = example_poset();
        let prefixes = poset.prefix_paths().unwrap();
        assert_eq!(prefixes.len(), 6);
        assert_eq!(
            label_seqs(&prefixes),
            BTreeSet::from([
                vec![],
                labels(&["x0"]),
                labels(&["x0", "INFLUENCE"]),
                labels(&["x0", "MARRY"]),
                labels(&["x0", "INFLUENCE", "Maxim_Gorky"]),
                labels(&["x0", "MARRY", "Siri_von_Essen"]),
            ])
        );
    }

    #[test]
    fn prefix_paths_single_vertex_and_empty() {
        let single =
            SemanticPoset::new(labels(&["x0"]), [], example_vocab()).unwrap();
        assert_eq!(
            label_seqs(&single.prefix_paths().unwrap()),
            BTreeSet::from([vec![], labels(&["x0"])])
        );

        let empty = SemanticPoset::new(Vec::new(), [], example_vocab()).unwrap();
        assert_eq!(
            label_seqs(&empty.prefix_paths().unwrap()),
            BTreeSet::from([vec![]])
        );
    }

    #[test]
    fn next_labels_examples() {
        let poset = example_poset();
        assert_eq!(
            poset.next_labels(&TraversalPath::empty()).unwrap(),
            BTreeSet::from([lbl("x0")])
        );
        let at_root = poset.path_by_labels(&labels(&["x0"])).unwrap();
        assert_eq!(
            poset.next_labels(&at_root).unwrap(),
            BTreeSet::from([lbl("INFLUENCE"), lbl("MARRY")])
        );
        let maximal = poset
            .path_by_labels(&labels(&["x0", "INFLUENCE", "Maxim_Gorky"]))
            .unwrap();
        assert_eq!(poset.next_labels(&maximal).unwrap(), BTreeSet::new());
    }

    #[test]
    fn next_labels_rejects_foreign_path() {
        let poset = example_poset();
        let foreign = TraversalPath {
            vertex_seq: vec![VertexId(1)],
            label_seq: labels(&["INFLUENCE"]),
        };
        assert!(matches!(poset.next_labels(&foreign), Err(PosetError::PathNotInPoset)));
    }

    #[test]
    fn reconstruct_example_round_trip() {
        let poset = example_poset();
        let seqs: Vec<Vec<Label>> = poset
            .maximal_paths()
            .unwrap()
            .into_iter()
            .map(|p| p.label_seq().to_vec())
            .collect();
        let rebuilt = reconstruct(&seqs, poset.vocab()).unwrap();
        assert!(poset.canonical_equal(&rebuilt).unwrap());
    }

    #[test]
    fn reconstruct_single_vertex() {
        let rebuilt = reconstruct(&[labels(&["x0"])], &example_vocab()).unwrap();
        assert_eq!(rebuilt.vertex_count(), 1);
        assert_eq!(rebuilt.label(VertexId(0)), &lbl("x0"));
    }

    #[test]
    fn reconstruct_merges_once_only_into_diamond() {
        // Both paths end at the once-only entity, which must unify globally.
        let rebuilt = reconstruct(
            &[
                labels(&["x0", "INFLUENCE", "Maxim_Gorky"]),
                labels(&["x0", "MARRY", "Maxim_Gorky"]),
            ],
            &example_vocab(),
        )
        .unwrap();
        assert_eq!(rebuilt.vertex_count(), 4);
        let shared = rebuilt
            .vertices()
            .find(|&v| rebuilt.label(v) == &lbl("Maxim_Gorky"))
            .unwrap();
        assert_eq!(rebuilt.in_degree(shared), 2);
    }

    #[test]
    fn reconstruct_is_permutation_invariant() {
        let a = labels(&["x0", "INFLUENCE", "Maxim_Gorky"]);
        let b = labels(&["x0", "MARRY", "Siri_von_Essen"]);
        let fwd = reconstruct(&[a.clone(), b.clone()], &example_vocab()).unwrap();
        let rev = reconstruct(&[b, a], &example_vocab()).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn reconstruct_rejects_inconsistent_paths() {
        // A once-only cycle: x1 appears below x0 in one path and above it in
        // the other, so the merged structure is cyclic.
        let err = reconstruct(
            &[
                labels(&["x0", "INFLUENCE", "x1"]),
                labels(&["x1", "MARRY", "x0"]),
            ],
            &example_vocab(),
        )
        .unwrap_err();
        assert!(matches!(err, PosetError::InconsistentPaths { .. }), "got {err:?}");
    }

    #[test]
    fn reconstruct_rejects_prefix_of_another_path() {
        // [x0] claims x0 is maximal while the other path extends it.
        let err = reconstruct(
            &[labels(&["x0"]), labels(&["x0", "INFLUENCE", "Maxim_Gorky"])],
            &example_vocab(),
        )
        .unwrap_err();
        assert!(matches!(err, PosetError::InconsistentPaths { .. }));
    }

    #[test]
    fn canonical_equal_examples() {
        let poset = example_poset();
        // Same structure built with the branches inserted in reverse order.
        let reversed = SemanticPoset::new(
            labels(&["x0", "MARRY", "INFLUENCE", "Siri_von_Essen", "Maxim_Gorky"]),
            [
                (VertexId(0), VertexId(1)),
                (VertexId(0), VertexId(2)),
                (VertexId(1), VertexId(3)),
                (VertexId(2), VertexId(4)),
            ],
            example_vocab(),
        )
        .unwrap();
        assert!(poset.canonical_equal(&reversed).unwrap());
        assert!(poset.canonical_equal(&poset).unwrap());

        let missing_branch = SemanticPoset::new(
            labels(&["x0", "INFLUENCE", "Maxim_Gorky"]),
            [(VertexId(0), VertexId(1)), (VertexId(1), VertexId(2))],
            example_vocab(),
        )
        .unwrap();
        assert!(!poset.canonical_equal(&missing_branch).unwrap());
    }

    #[test]
    fn label_rejects_empty_and_whitespace() {
        assert_eq!(Label::new(""), Err(LabelError::Empty));
        assert!(matches!(Label::new("a b"), Err(LabelError::Whitespace(_))));
    }

    #[test]
    fn vocabulary_rejects_unknown_once_only() {
        let err = Vocabulary::new(labels(&["a"]), labels(&["b"])).unwrap_err();
        assert_eq!(err, VocabularyError::OnceOnlyNotInVocabulary(lbl("b")));
    }
}
