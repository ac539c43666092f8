//! Conjunctive queries: surface syntax, canonical linearization, and the
//! query ⇄ semantic poset bridge.
//!
//! The surface grammar is a small conjunctive fragment:
//!
//! ```text
//! query  = "SELECT" meta "WHERE" "{" triple (" . " triple)* "}"
//! triple = term predicate term
//! term   = "?" variable | entity
//! ```
//!
//! Variables are written `?x0`, `?x1`, …; entities are bare tokens that must
//! not look like variables, which keeps the two classes lexically disjoint.
//! The select header between `SELECT` and `WHERE` is carried as opaque
//! metadata and re-emitted verbatim (modulo whitespace normalization); the
//! poset covers only the clause body, so reconstruction takes the header as
//! an argument.
//!
//! Canonical text sorts clauses lexicographically by (head, predicate, tail),
//! which makes serialization byte-deterministic for a given query.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::poset::{Label, PosetError, SemanticPoset, ValidationReport, VertexId, Vocabulary};

/// True for tokens of the variable class: `x` followed by decimal digits.
pub fn is_variable_token(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('x') && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
    }
}

/// A clause argument: a variable (`?x0`) or an entity token.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Variable(String),
    Entity(Label),
}

impl Term {
    pub fn variable(name: impl Into<String>) -> Result<Self, QueryError> {
        let name = name.into();
        if !is_variable_token(&name) {
            return Err(QueryError::BadVariableName(name));
        }
        Ok(Term::Variable(name))
    }

    pub fn entity(label: Label) -> Result<Self, QueryError> {
        if is_variable_token(label.as_str()) {
            return Err(QueryError::BadEntityName(label.as_str().to_string()));
        }
        Ok(Term::Entity(label))
    }

    /// The poset label for this term (variables keep their bare name).
    pub fn label(&self) -> Label {
        match self {
            Term::Variable(name) => Label::new(name.clone()).expect("validated"),
            Term::Entity(label) => label.clone(),
        }
    }

    /// Surface rendering: `?x0` for variables, the bare token for entities.
    pub fn render(&self) -> String {
        match self {
            Term::Variable(name) => format!("?{name}"),
            Term::Entity(label) => label.as_str().to_string(),
        }
    }

    /// Inverse of [`Term::render`] on a poset label: tokens of the variable
    /// class become variables, everything else an entity.
    pub fn from_label(label: &Label) -> Term {
        if is_variable_token(label.as_str()) {
            Term::Variable(label.as_str().to_string())
        } else {
            Term::Entity(label.clone())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.render().cmp(&other.render())
    }
}

/// One conjunct `(head, predicate, tail)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Term,
    pub predicate: Label,
    pub tail: Term,
}

impl Clause {
    pub fn render(&self) -> String {
        format!("{} {} {}", self.head.render(), self.predicate, self.tail.render())
    }
}

impl PartialOrd for Clause {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Clause {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.head.render(), self.predicate.as_str(), self.tail.render()).cmp(&(
            other.head.render(),
            other.predicate.as_str(),
            other.tail.render(),
        ))
    }
}

/// A conjunctive query: an opaque select header, the variables in
/// first-mention order, and a duplicate-free clause set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    pub select_meta: String,
    pub variables: Vec<String>,
    pub clauses: BTreeSet<Clause>,
}

impl ConjunctiveQuery {
    /// Canonical linearization: clauses sorted by (head, predicate, tail).
    pub fn canonical_text(&self) -> String {
        let body: Vec<String> = self.clauses.iter().map(Clause::render).collect();
        format!("SELECT {} WHERE {{ {} }}", self.select_meta, body.join(" . "))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("non-conjunctive feature {keyword} at {line}:{col}")]
    NonConjunctiveFeature { line: usize, col: usize, keyword: String },
    #[error("variable name {0:?} must be x followed by digits")]
    BadVariableName(String),
    #[error("entity token {0:?} would be ambiguous with a variable")]
    BadEntityName(String),
    #[error("query induces a cyclic structure")]
    CyclicQuery,
    #[error("token {0} is not in the vocabulary (or is in the wrong class)")]
    UnknownToken(Label),
    #[error("poset is not the image of a query: {0}")]
    NotQueryShaped(String),
    #[error("query induces a structure that is not a valid semantic poset")]
    InvalidInducedPoset(ValidationReport),
    #[error("{0}")]
    Poset(String),
}

impl From<PosetError> for QueryError {
    fn from(e: PosetError) -> Self {
        QueryError::Poset(e.to_string())
    }
}

struct Token {
    text: String,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let mut col = 1usize;
        let mut current = String::new();
        let mut start_col = 1usize;
        let flush = |current: &mut String, start_col: usize, tokens: &mut Vec<Token>| {
            if !current.is_empty() {
                tokens.push(Token {
                    text: std::mem::take(current),
                    line: line_idx + 1,
                    col: start_col,
                });
            }
        };
        for ch in line.chars() {
            if ch.is_whitespace() {
                flush(&mut current, start_col, &mut tokens);
            } else if ch == '{' || ch == '}' {
                flush(&mut current, start_col, &mut tokens);
                tokens.push(Token { text: ch.to_string(), line: line_idx + 1, col });
            } else {
                if current.is_empty() {
                    start_col = col;
                }
                current.push(ch);
            }
            col += 1;
        }
        flush(&mut current, start_col, &mut tokens);
    }
    tokens
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn error_here(&self, message: impl Into<String>) -> QueryError {
        let (line, col) = self
            .tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1));
        QueryError::Syntax { line, col, message: message.into() }
    }

    fn expect(&mut self, keyword: &str) -> Result<(), QueryError> {
        match self.next() {
            Some(tok) if tok.text == keyword => Ok(()),
            Some(tok) => {
                let (line, col, text) = (tok.line, tok.col, tok.text.clone());
                Err(QueryError::Syntax {
                    line,
                    col,
                    message: format!("expected {keyword:?}, found {text:?}"),
                })
            }
            None => Err(self.error_here(format!("expected {keyword:?}, found end of input"))),
        }
    }
}

fn check_conjunctive(tok: &Token) -> Result<(), QueryError> {
    for keyword in ["OPTIONAL", "FILTER", "UNION"] {
        if tok.text.eq_ignore_ascii_case(keyword) {
            return Err(QueryError::NonConjunctiveFeature {
                line: tok.line,
                col: tok.col,
                keyword: keyword.to_string(),
            });
        }
    }
    Ok(())
}

fn parse_term(tok: &Token) -> Result<Term, QueryError> {
    check_conjunctive(tok)?;
    if let Some(name) = tok.text.strip_prefix('?') {
        Term::variable(name).map_err(|_| QueryError::Syntax {
            line: tok.line,
            col: tok.col,
            message: format!("variable {:?} must be ?x<digits>", tok.text),
        })
    } else {
        let label = Label::new(tok.text.clone()).map_err(|e| QueryError::Syntax {
            line: tok.line,
            col: tok.col,
            message: e.to_string(),
        })?;
        Term::entity(label).map_err(|_| QueryError::Syntax {
            line: tok.line,
            col: tok.col,
            message: format!("bare token {:?} looks like a variable; write ?{}", tok.text, tok.text),
        })
    }
}

/// Parses the artifact's conjunctive query grammar. Clauses are
/// deduplicated; variables are collected in first-mention order.
pub fn parse_query(text: &str) -> Result<ConjunctiveQuery, QueryError> {
    let mut p = Parser { tokens: tokenize(text), pos: 0 };

    p.expect("SELECT")?;
    let mut meta_parts: Vec<String> = Vec::new();
    loop {
        match p.peek() {
            Some(tok) if tok.text == "WHERE" => break,
            Some(tok) if tok.text == "{" => {
                return Err(p.error_here("expected WHERE before {"));
            }
            Some(_) => {
                let tok = p.next().expect("peeked");
                meta_parts.push(tok.text.clone());
            }
            None => return Err(p.error_here("expected WHERE, found end of input")),
        }
    }
    if meta_parts.is_empty() {
        return Err(p.error_here("missing select header between SELECT and WHERE"));
    }
    p.expect("WHERE")?;
    p.expect("{")?;

    let mut clauses_in_order: Vec<Clause> = Vec::new();
    loop {
        // term predicate term
        let head = match p.next() {
            Some(tok) if tok.text == "}" => {
                return Err(p.error_here("expected a triple, found }"));
            }
            Some(tok) => parse_term(tok)?,
            None => return Err(p.error_here("expected a triple, found end of input")),
        };
        let predicate = match p.next() {
            Some(tok) if tok.text == "." || tok.text == "}" => {
                let (line, col, text) = (tok.line, tok.col, tok.text.clone());
                return Err(QueryError::Syntax {
                    line,
                    col,
                    message: format!("triple is missing predicate and tail (found {text:?})"),
                });
            }
            Some(tok) => {
                check_conjunctive(tok)?;
                if tok.text.starts_with('?') {
                    let (line, col) = (tok.line, tok.col);
                    return Err(QueryError::Syntax {
                        line,
                        col,
                        message: "predicate cannot be a variable".to_string(),
                    });
                }
                let (line, col) = (tok.line, tok.col);
                Label::new(tok.text.clone())
                    .map_err(|e| QueryError::Syntax { line, col, message: e.to_string() })?
            }
            None => return Err(p.error_here("expected predicate, found end of input")),
        };
        let tail = match p.next() {
            Some(tok) if tok.text == "." || tok.text == "}" => {
                let (line, col, text) = (tok.line, tok.col, tok.text.clone());
                return Err(QueryError::Syntax {
                    line,
                    col,
                    message: format!("triple is missing tail (found {text:?})"),
                });
            }
            Some(tok) => parse_term(tok)?,
            None => return Err(p.error_here("expected tail term, found end of input")),
        };
        clauses_in_order.push(Clause { head, predicate, tail });

        match p.next() {
            Some(tok) if tok.text == "." => continue,
            Some(tok) if tok.text == "}" => break,
            Some(tok) => {
                let (line, col, text) = (tok.line, tok.col, tok.text.clone());
                return Err(QueryError::Syntax {
                    line,
                    col,
                    message: format!("expected . or }} after triple, found {text:?}"),
                });
            }
            None => return Err(p.error_here("expected . or } after triple")),
        }
    }
    if p.peek().is_some() {
        return Err(p.error_here("unexpected trailing tokens after }"));
    }

    let mut variables: Vec<String> = Vec::new();
    for clause in &clauses_in_order {
        for term in [&clause.head, &clause.tail] {
            if let Term::Variable(name) = term {
                if !variables.contains(name) {
                    variables.push(name.clone());
                }
            }
        }
    }

    Ok(ConjunctiveQuery {
        select_meta: meta_parts.join(" "),
        variables,
        clauses: clauses_in_order.into_iter().collect(),
    })
}

/// Builds the semantic poset of a query.
///
/// One vertex per distinct variable/entity; for each (head, predicate) pair
/// one predicate vertex covering all of its tails. The passed vocabulary must
/// classify the tokens the same way the query does: variables and entities
/// once-only, predicates not.
pub fn query_to_poset(
    query: &ConjunctiveQuery,
    vocab: &Vocabulary,
) -> Result<SemanticPoset, QueryError> {
    for clause in &query.clauses {
        for term in [&clause.head, &clause.tail] {
            let label = term.label();
            if !vocab.is_once_only(&label) {
                return Err(QueryError::UnknownToken(label));
            }
        }
        if !vocab.contains(&clause.predicate) || vocab.is_once_only(&clause.predicate) {
            return Err(QueryError::UnknownToken(clause.predicate.clone()));
        }
    }

    let mut labels: Vec<Label> = Vec::new();
    let mut edges: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
    let mut term_vertex: BTreeMap<Label, VertexId> = BTreeMap::new();
    let mut predicate_vertex: BTreeMap<(Label, Label), VertexId> = BTreeMap::new();

    fn intern_term(
        map: &mut BTreeMap<Label, VertexId>,
        label: Label,
        labels: &mut Vec<Label>,
    ) -> VertexId {
        *map.entry(label.clone()).or_insert_with(|| {
            let id = VertexId(labels.len() as u32);
            labels.push(label);
            id
        })
    }

    for clause in &query.clauses {
        let head = intern_term(&mut term_vertex, clause.head.label(), &mut labels);
        let tail = intern_term(&mut term_vertex, clause.tail.label(), &mut labels);
        let pv = *predicate_vertex
            .entry((clause.head.label(), clause.predicate.clone()))
            .or_insert_with(|| {
                let id = VertexId(labels.len() as u32);
                labels.push(clause.predicate.clone());
                id
            });
        edges.insert((head, pv));
        edges.insert((pv, tail));
    }

    let poset = SemanticPoset::new(labels, edges, vocab.clone())?;
    let report = poset.validate();
    if report.ok {
        return Ok(poset);
    }
    if report.violations.iter().any(|v| matches!(v, crate::poset::Violation::Cycle { .. })) {
        return Err(QueryError::CyclicQuery);
    }
    Err(QueryError::InvalidInducedPoset(report))
}

/// Inverse of [`query_to_poset`] up to clause ordering. The select header is
/// not part of the poset and is supplied by the caller.
pub fn poset_to_query(
    poset: &SemanticPoset,
    select_meta: &str,
) -> Result<ConjunctiveQuery, QueryError> {
    let report = poset.validate();
    if !report.ok {
        return Err(PosetError::InvalidPoset(report).into());
    }

    let is_term = |v: VertexId| poset.vocab().is_once_only(poset.label(v));

    let mut clauses: BTreeSet<Clause> = BTreeSet::new();
    for v in poset.vertices() {
        if is_term(v) {
            // Term vertices may only connect to predicate vertices.
            for &c in poset.children(v) {
                if is_term(c) {
                    return Err(QueryError::NotQueryShaped(format!(
                        "edge between two term vertices {} and {}",
                        poset.label(v),
                        poset.label(c)
                    )));
                }
            }
            continue;
        }
        // Predicate vertex: exactly one parent (a term), one or more tails.
        let parents = poset.parents(v);
        if parents.len() != 1 {
            return Err(QueryError::NotQueryShaped(format!(
                "predicate vertex {} has {} parents",
                poset.label(v),
                parents.len()
            )));
        }
        let head = parents[0];
        if !is_term(head) {
            return Err(QueryError::NotQueryShaped(format!(
                "predicate vertex {} has a predicate parent",
                poset.label(v)
            )));
        }
        if poset.children(v).is_empty() {
            return Err(QueryError::NotQueryShaped(format!(
                "predicate vertex {} has no tails",
                poset.label(v)
            )));
        }
        for &t in poset.children(v) {
            if !is_term(t) {
                return Err(QueryError::NotQueryShaped(format!(
                    "predicate vertex {} covers another predicate vertex",
                    poset.label(v)
                )));
            }
            clauses.insert(Clause {
                head: Term::from_label(poset.label(head)),
                predicate: poset.label(v).clone(),
                tail: Term::from_label(poset.label(t)),
            });
        }
    }

    // Isolated term vertices cannot come from any clause.
    for v in poset.vertices() {
        if is_term(v) && poset.in_degree(v) == 0 && poset.out_degree(v) == 0 {
            return Err(QueryError::NotQueryShaped(format!(
                "isolated vertex {}",
                poset.label(v)
            )));
        }
    }
    if clauses.is_empty() {
        return Err(QueryError::NotQueryShaped("no clauses".to_string()));
    }

    let mut variables: Vec<String> = Vec::new();
    for clause in &clauses {
        for term in [&clause.head, &clause.tail] {
            if let Term::Variable(name) = term {
                if !variables.contains(name) {
                    variables.push(name.clone());
                }
            }
        }
    }

    Ok(ConjunctiveQuery { select_meta: select_meta.to_string(), variables, clauses })
}

/// One block of a merged-triple expression: the clause set restricted to
/// `head` contains the full product `predicates × tails`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimplifiedBlock {
    pub head: Term,
    pub predicates: BTreeSet<Label>,
    pub tails: BTreeSet<Term>,
}

impl SimplifiedBlock {
    pub fn render(&self) -> String {
        let preds: Vec<&str> = self.predicates.iter().map(Label::as_str).collect();
        let tails: Vec<String> = self.tails.iter().map(Term::render).collect();
        format!("({}, ({}), ({}))", self.head.render(), preds.join(" "), tails.join(" "))
    }
}

/// The merged-triple expression of a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplifiedQuery {
    pub blocks: Vec<SimplifiedBlock>,
}

impl SimplifiedQuery {
    pub fn render(&self) -> String {
        let parts: Vec<String> = self.blocks.iter().map(SimplifiedBlock::render).collect();
        parts.join(" . ")
    }

    /// Re-expands every block into its Cartesian product of clauses.
    pub fn expand(&self) -> BTreeSet<Clause> {
        let mut out = BTreeSet::new();
        for block in &self.blocks {
            for predicate in &block.predicates {
                for tail in &block.tails {
                    out.insert(Clause {
                        head: block.head.clone(),
                        predicate: predicate.clone(),
                        tail: tail.clone(),
                    });
                }
            }
        }
        out
    }
}

/// Groups clauses into maximal (head, predicate-set, tail-set) blocks whose
/// Cartesian product is fully contained in the clause set: per head,
/// predicates with identical tail sets merge into one block.
pub fn simplify_query(query: &ConjunctiveQuery) -> SimplifiedQuery {
    let mut per_head: BTreeMap<Term, BTreeMap<Label, BTreeSet<Term>>> = BTreeMap::new();
    for clause in &query.clauses {
        per_head
            .entry(clause.head.clone())
            .or_default()
            .entry(clause.predicate.clone())
            .or_default()
            .insert(clause.tail.clone());
    }

    let mut blocks = Vec::new();
    for (head, by_predicate) in per_head {
        let mut by_tailset: BTreeMap<BTreeSet<Term>, BTreeSet<Label>> = BTreeMap::new();
        for (predicate, tails) in by_predicate {
            by_tailset.entry(tails).or_default().insert(predicate);
        }
        for (tails, predicates) in by_tailset {
            blocks.push(SimplifiedBlock { head: head.clone(), predicates, tails });
        }
    }
    blocks.sort();
    SimplifiedQuery { blocks }
}
