//! Poset serialization: a line-oriented text form and a structured JSON form.
//!
//! Text form, tab-separated:
//!
//! ```text
//! #once-only<TAB>tok...        header, sorted once-only tokens
//! #vertex<TAB>id<TAB>label     one line per vertex, ascending id
//! srcId<TAB>dstId<TAB>srcLabel<TAB>dstLabel   one line per covering edge
//! ```
//!
//! Edge lines carry the endpoint labels for readability and the vertex ids
//! for identity: bare label pairs are ambiguous whenever a non-once-only
//! label occurs on more than one vertex, so ids are part of the format. Edge
//! label columns are checked against the vertex declarations on parse.
//!
//! Both forms are emitted canonically (sorted header, ids ascending, edges
//! sorted) so that parse ∘ serialize is the identity on bytes and
//! serialize ∘ parse is the identity on values. The text form encodes the
//! structure plus the once-only header; the JSON form additionally carries
//! the full vocabulary.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Label, PosetError, SemanticPoset, VertexId, Vocabulary};

#[derive(Debug, Error)]
pub enum PosetParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid label: {0}")]
    Label(#[from] super::LabelError),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(#[from] super::VocabularyError),
    #[error("invalid structure: {0}")]
    Poset(#[from] PosetError),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn malformed(line: usize, message: impl Into<String>) -> PosetParseError {
    PosetParseError::Malformed { line, message: message.into() }
}

/// JSON wire form: vertices with ids and labels, an edge list, and the
/// vocabulary. Field order is fixed, so serialization is byte-deterministic.
#[derive(Debug, Serialize, Deserialize)]
pub struct PosetJson {
    pub once_only: Vec<String>,
    pub all_tokens: Vec<String>,
    pub vertices: Vec<PosetJsonVertex>,
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PosetJsonVertex {
    pub id: u32,
    pub label: String,
}

impl SemanticPoset {
    /// Canonical line-oriented text form.
    pub fn to_text(&self) -> String {
        let mut out = String::from("#once-only");
        for tok in self.vocab().once_only() {
            out.push('\t');
            out.push_str(tok.as_str());
        }
        out.push('\n');
        for v in self.vertices() {
            out.push_str(&format!("#vertex\t{}\t{}\n", v.0, self.label(v)));
        }
        for &(src, dst) in self.edges() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                src.0,
                dst.0,
                self.label(src),
                self.label(dst)
            ));
        }
        out
    }

    /// Parses the text form produced by [`SemanticPoset::to_text`].
    ///
    /// The vocabulary of the result is the union of the vertex labels and the
    /// once-only header (the text form does not carry unused tokens).
    pub fn from_text(text: &str) -> Result<Self, PosetParseError> {
        let mut once_only: Vec<Label> = Vec::new();
        let mut vertex_labels: Vec<(u32, Label)> = Vec::new();
        let mut edges: Vec<(VertexId, VertexId)> = Vec::new();
        let mut saw_header = false;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            match fields[0] {
                "#once-only" => {
                    if saw_header {
                        return Err(malformed(line_no, "duplicate #once-only header"));
                    }
                    saw_header = true;
                    for tok in &fields[1..] {
                        once_only.push(Label::new(*tok)?);
                    }
                }
                "#vertex" => {
                    if fields.len() != 3 {
                        return Err(malformed(line_no, "expected #vertex<TAB>id<TAB>label"));
                    }
                    let id: u32 = fields[1]
                        .parse()
                        .map_err(|_| malformed(line_no, "vertex id is not an integer"))?;
                    if id as usize != vertex_labels.len() {
                        return Err(malformed(line_no, "vertex ids must be dense and ascending"));
                    }
                    vertex_labels.push((id, Label::new(fields[2])?));
                }
                _ => {
                    if fields.len() != 4 {
                        return Err(malformed(
                            line_no,
                            "expected srcId<TAB>dstId<TAB>srcLabel<TAB>dstLabel",
                        ));
                    }
                    let src: u32 = fields[0]
                        .parse()
                        .map_err(|_| malformed(line_no, "edge source is not an integer"))?;
                    let dst: u32 = fields[1]
                        .parse()
                        .map_err(|_| malformed(line_no, "edge target is not an integer"))?;
                    for (id, column) in [(src, 2usize), (dst, 3usize)] {
                        let declared = vertex_labels
                            .get(id as usize)
                            .ok_or_else(|| malformed(line_no, format!("unknown vertex {id}")))?;
                        if declared.1.as_str() != fields[column] {
                            return Err(malformed(
                                line_no,
                                format!(
                                    "edge label {:?} disagrees with vertex {} declared as {:?}",
                                    fields[column],
                                    id,
                                    declared.1.as_str()
                                ),
                            ));
                        }
                    }
                    edges.push((VertexId(src), VertexId(dst)));
                }
            }
        }

        if !saw_header {
            return Err(malformed(0, "missing #once-only header"));
        }

        let labels: Vec<Label> = vertex_labels.into_iter().map(|(_, l)| l).collect();
        let mut all_tokens: BTreeSet<Label> = labels.iter().cloned().collect();
        all_tokens.extend(once_only.iter().cloned());
        let vocab = Vocabulary::new(all_tokens, once_only)?;
        Ok(SemanticPoset::new(labels, edges, vocab)?)
    }

    pub fn to_json_value(&self) -> PosetJson {
        PosetJson {
            once_only: self.vocab().once_only().iter().map(|l| l.as_str().to_string()).collect(),
            all_tokens: self.vocab().all_tokens().iter().map(|l| l.as_str().to_string()).collect(),
            vertices: self
                .vertices()
                .map(|v| PosetJsonVertex { id: v.0, label: self.label(v).as_str().to_string() })
                .collect(),
            edges: self.edges().iter().map(|&(s, d)| (s.0, d.0)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("poset JSON serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, PosetParseError> {
        let wire: PosetJson = serde_json::from_str(text)?;
        let mut labels = Vec::with_capacity(wire.vertices.len());
        for (idx, v) in wire.vertices.iter().enumerate() {
            if v.id as usize != idx {
                return Err(malformed(0, "vertex ids must be dense and ascending"));
            }
            labels.push(Label::new(v.label.as_str())?);
        }
        let all_tokens = wire
            .all_tokens
            .iter()
            .map(|s| Label::new(s.as_str()))
            .collect::<Result<Vec<_>, _>>()?;
        let once_only = wire
            .once_only
            .iter()
            .map(|s| Label::new(s.as_str()))
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = Vocabulary::new(all_tokens, once_only)?;
        let edges = wire.edges.into_iter().map(|(s, d)| (VertexId(s), VertexId(d)));
        Ok(SemanticPoset::new(labels, edges, vocab)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_fixtures::*;
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let poset = example_poset();
        let text = poset.to_text();
        let parsed = SemanticPoset::from_text(&text).unwrap();
        // Value round trip: same structure and once-only set; byte round trip:
        // re-serialization is identical.
        assert_eq!(parsed.labels(), poset.labels());
        assert_eq!(parsed.edges(), poset.edges());
        assert_eq!(parsed.vocab().once_only(), poset.vocab().once_only());
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let poset = example_poset();
        let json = poset.to_json();
        let parsed = SemanticPoset::from_json(&json).unwrap();
        assert_eq!(&parsed, &poset);
        assert_eq!(parsed.to_json(), json);
    }

    #[test]
    fn text_form_keeps_repeated_labels_distinct() {
        // Two distinct INFLUENCE vertices under different heads.
        let poset = SemanticPoset::new(
            labels(&["x0", "INFLUENCE", "x1", "INFLUENCE", "Maxim_Gorky"]),
            [
                (VertexId(0), VertexId(1)),
                (VertexId(1), VertexId(2)),
                (VertexId(2), VertexId(3)),
                (VertexId(3), VertexId(4)),
            ],
            example_vocab(),
        )
        .unwrap();
        let parsed = SemanticPoset::from_text(&poset.to_text()).unwrap();
        assert_eq!(parsed.labels(), poset.labels());
        assert_eq!(parsed.edges(), poset.edges());
    }

    #[test]
    fn text_parse_rejects_label_mismatch() {
        let text = "#once-only\tx0\n#vertex\t0\tx0\n#vertex\t1\tINFLUENCE\n0\t1\tx0\tMARRY\n";
        let err = SemanticPoset::from_text(text).unwrap_err();
        assert!(matches!(err, PosetParseError::Malformed { line: 4, .. }), "got {err:?}");
    }

    #[test]
    fn empty_poset_serializes() {
        let poset = SemanticPoset::new(Vec::new(), [], example_vocab()).unwrap();
        let parsed = SemanticPoset::from_text(&poset.to_text()).unwrap();
        assert_eq!(parsed.vertex_count(), 0);
    }
}
