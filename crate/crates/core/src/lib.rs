//! Hierarchical poset decoding for conjunctive logical queries.
//!
//! The library converts conjunctive queries to *semantic posets* (labeled
//! Hasse diagrams with a once-only vocabulary constraint), extracts abstract
//! sketches from them, induces phrase tables for primitive prediction,
//! enumerates and scores slot-filled traversal paths, and deterministically
//! reconstructs predicted posets from accepted paths.
//!
//! The running example used throughout the docs and tests is the question
//! *"Who influences Maxim Gorky and marries Siri von Essen?"*, whose meaning
//! is the query
//!
//! ```text
//! SELECT DISTINCT ?x0 WHERE { ?x0 INFLUENCE Maxim_Gorky . ?x0 MARRY Siri_von_Essen }
//! ```
//!
//! and whose semantic poset is the five-vertex DAG
//!
//! ```text
//! x0 -> INFLUENCE -> Maxim_Gorky
//! x0 -> MARRY     -> Siri_von_Essen
//! ```
//!
//! Module map:
//! - [`poset`] — the semantic poset structure, validation, traversal paths,
//!   reconstruction from path sets, serialization.
//! - [`query`] — conjunctive query surface syntax, query ⇄ poset conversion,
//!   canonical linearization, merged-triple simplification.
//! - [`sketch`] — abstraction function and sketch extraction.
//! - [`phrase_table`] — co-occurrence phrase table induction and primitive
//!   prediction.
//! - [`neural`] — desk-scale bidirectional GRU encoder, attention-based path
//!   decoder with per-token binary heads, feature-based path entailment
//!   scorer, training loops and gradient verification.
//! - [`decode`] — poset generation over a pluggable next-label scorer,
//!   candidate path enumeration, and the full hierarchical pipeline.
//! - [`harness`] — dataset ingestion, synthetic data generation, evaluation
//!   and per-stage breakdown reports.

pub mod config;
pub mod decode;
pub mod harness;
pub mod neural;
pub mod phrase_table;
pub mod poset;
pub mod query;
pub mod sketch;

pub use poset::{Label, SemanticPoset, TraversalPath, ValidationReport, Vocabulary};
pub use query::ConjunctiveQuery;
