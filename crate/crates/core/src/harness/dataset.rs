//! Dataset records and JSONL ingestion with a configurable field map.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::poset::{Label, Vocabulary};
use crate::query::{parse_query, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => f.write_str("train"),
            Split::Dev => f.write_str("dev"),
            Split::Test => f.write_str("test"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train/dev/test)")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct DatasetRecord {
    pub question: String,
    pub query: String,
    pub split: Split,
}

/// Where to find the question/query/split in each JSON record. Defaults to
/// the native field names; point it at other keys to ingest foreign formats.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct FieldMap {
    pub question: String,
    pub query: String,
    pub split: String,
    /// Used when the split field is absent from a record.
    pub default_split: Split,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            question: "question".to_string(),
            query: "query".to_string(),
            split: "split".to_string(),
            default_split: Split::Train,
        }
    }
}

/// A record that could not be ingested, with its line number.
#[derive(Clone, Debug, Serialize)]
pub struct LoadIssue {
    pub line: usize,
    pub message: String,
}

/// Loads JSONL records through the field map, validating that every query
/// parses. Failures are collected as issues; under `strict` the first
/// failure aborts the load.
pub fn load_dataset(
    path: &Path,
    field_map: &FieldMap,
    strict: bool,
) -> Result<(Vec<DatasetRecord>, Vec<LoadIssue>), HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io { path: path.display().to_string(), source: e })?;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match ingest_line(line, field_map) {
            Ok(record) => records.push(record),
            Err(message) => {
                if strict {
                    return Err(HarnessError::Format { line: line_no, message });
                }
                issues.push(LoadIssue { line: line_no, message });
            }
        }
    }
    Ok((records, issues))
}

fn ingest_line(line: &str, field_map: &FieldMap) -> Result<DatasetRecord, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let question = value
        .get(&field_map.question)
        .and_then(|v| v.as_str())
        .ok_or_else(|| format!("missing string field {:?}", field_map.question))?
        .to_string();
    if question.trim().is_empty() {
        return Err("question is empty".to_string());
    }
    let query = value
        .get(&field_map.query)
        .and_then(|v| v.as_str())
        .ok_or_else(|| format!("missing string field {:?}", field_map.query))?
        .to_string();
    parse_query(&query).map_err(|e| format!("query does not parse: {e}"))?;
    let split = match value.get(&field_map.split).and_then(|v| v.as_str()) {
        Some(s) => s.parse().map_err(|e: String| e)?,
        None => field_map.default_split,
    };
    Ok(DatasetRecord { question, query, split })
}

pub fn save_dataset(path: &Path, records: &[DatasetRecord]) -> Result<(), HarnessError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serialization"));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| HarnessError::Io { path: path.display().to_string(), source: e })
}

/// The task vocabulary implied by a record set: every query is parsed,
/// predicates become ordinary tokens and variables/entities once-only ones.
pub fn vocab_from_records(records: &[DatasetRecord]) -> Result<Vocabulary, HarnessError> {
    let mut all: BTreeSet<Label> = BTreeSet::new();
    let mut once_only: BTreeSet<Label> = BTreeSet::new();
    for record in records {
        let query = parse_query(&record.query)
            .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })?;
        for clause in &query.clauses {
            all.insert(clause.predicate.clone());
            for term in [&clause.head, &clause.tail] {
                let label = term.label();
                once_only.insert(label.clone());
                all.insert(label);
                let _ = matches!(term, Term::Variable(_));
            }
        }
    }
    Vocabulary::new(all, once_only)
        .map_err(|e| HarnessError::Format { line: 0, message: e.to_string() })
}

pub fn split_records(records: &[DatasetRecord], split: Split) -> Vec<DatasetRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_jsonl_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let records = vec![
            DatasetRecord {
                question: "Who influences Maxim Gorky?".to_string(),
                query: "SELECT DISTINCT ?x0 WHERE { ?x0 INFLUENCE Maxim_Gorky }".to_string(),
                split: Split::Train,
            },
            DatasetRecord {
                question: "Who marries Siri von Essen?".to_string(),
                query: "SELECT DISTINCT ?x0 WHERE { ?x0 MARRY Siri_von_Essen }".to_string(),
                split: Split::Dev,
            },
        ];
        save_dataset(&path, &records).unwrap();
        let (loaded, issues) = load_dataset(&path, &FieldMap::default(), false).unwrap();
        assert!(issues.is_empty());
        assert_eq!(loaded, records);
    }

    #[test]
    fn foreign_field_names_are_mapped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfq.jsonl");
        std::fs::write(
            &path,
            "{\"questionText\":\"Who influences Maxim Gorky?\",\"sparql\":\"SELECT DISTINCT ?x0 WHERE { ?x0 INFLUENCE Maxim_Gorky }\"}\n",
        )
        .unwrap();
        let field_map = FieldMap {
            question: "questionText".to_string(),
            query: "sparql".to_string(),
            split: "split".to_string(),
            default_split: Split::Test,
        };
        let (loaded, issues) = load_dataset(&path, &field_map, false).unwrap();
        assert!(issues.is_empty());
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].split, Split::Test);
    }

    #[test]
    fn unparseable_query_is_an_issue_and_strict_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"question\":\"ok?\",\"query\":\"SELECT ?x0 WHERE { ?x0 INFLUENCE }\"}\n",
        )
        .unwrap();
        let (loaded, issues) = load_dataset(&path, &FieldMap::default(), false).unwrap();
        assert!(loaded.is_empty());
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, 1);

        let err = load_dataset(&path, &FieldMap::default(), true).unwrap_err();
        assert!(matches!(err, HarnessError::Format { line: 1, .. }));
    }

    #[test]
    fn vocab_is_collected_from_queries() {
        let records = vec![DatasetRecord {
            question: "q".to_string(),
            query: "SELECT DISTINCT ?x0 WHERE { ?x0 INFLUENCE Maxim_Gorky }".to_string(),
            split: Split::Train,
        }];
        let vocab = vocab_from_records(&records).unwrap();
        assert!(vocab.contains(&Label::new("INFLUENCE").unwrap()));
        assert!(vocab.is_once_only(&Label::new("Maxim_Gorky").unwrap()));
        assert!(vocab.is_once_only(&Label::new("x0").unwrap()));
        assert!(!vocab.is_once_only(&Label::new("INFLUENCE").unwrap()));
    }
}
