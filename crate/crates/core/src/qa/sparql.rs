//! A small SPARQL subset: `SELECT ?a ?b WHERE { s p o . ... } LIMIT n` with
//! one to four triple patterns. Terms are variables, `<iri>` or plain
//! `"string"` literals.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Datatype, Iri, KnowledgeGraph, Literal, Term};

pub const MAX_PATTERNS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum PatternTerm {
    Var(String),
    Iri(Iri),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectQuery {
    pub vars: Vec<String>,
    pub patterns: Vec<TriplePattern>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query parse error at byte {at}: {message}")]
pub struct QueryParseError {
    pub at: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("query needs 1 to {MAX_PATTERNS} patterns, got {0}")]
    PatternCount(usize),
    #[error("selected variable ?{0} does not occur in any pattern")]
    UnboundVariable(String),
    #[error("a literal cannot be a subject or predicate")]
    LiteralPosition,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Iri(i) => write!(f, "<{i}>"),
            PatternTerm::Literal(s) => write!(f, "\"{}\"", escape(s)),
        }
    }
}

impl fmt::Display for SelectQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT")?;
        for v in &self.vars {
            write!(f, " ?{v}")?;
        }
        f.write_str(" WHERE {")?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(" .")?;
            }
            write!(f, " {} {} {}", p.subject, p.predicate, p.object)?;
        }
        f.write_str(" }")?;
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl SelectQuery {
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.patterns.is_empty() || self.patterns.len() > MAX_PATTERNS {
            return Err(QueryError::PatternCount(self.patterns.len()));
        }
        for p in &self.patterns {
            if matches!(p.subject, PatternTerm::Literal(_)) || matches!(p.predicate, PatternTerm::Literal(_)) {
                return Err(QueryError::LiteralPosition);
            }
        }
        for v in &self.vars {
            let used = self.patterns.iter().any(|p| {
                [&p.subject, &p.predicate, &p.object].into_iter().any(|t| matches!(t, PatternTerm::Var(x) if x == v))
            });
            if !used {
                return Err(QueryError::UnboundVariable(v.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Var(String),
    Iri(String),
    Str(String),
    Int(usize),
    Open,
    Close,
    Dot,
}

fn lex(input: &str) -> Result<Vec<(usize, Token)>, QueryParseError> {
    let err = |at: usize, message: &str| QueryParseError { at, message: message.to_owned() };
    let mut out = Vec::new();
    let mut it = input.char_indices().peekable();
    while let Some(&(at, c)) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '{' | '}' | '.' => {
                it.next();
                out.push((at, match c {
                    '{' => Token::Open,
                    '}' => Token::Close,
                    _ => Token::Dot,
                }));
            }
            '?' | '$' => {
                it.next();
                let mut name = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        name.push(c);
                        it.next();
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    return Err(err(at, "empty variable name"));
                }
                out.push((at, Token::Var(name)));
            }
            '<' => {
                it.next();
                let mut iri = String::new();
                loop {
                    match it.next() {
                        Some((_, '>')) => break,
                        Some((_, c)) => iri.push(c),
                        None => return Err(err(at, "unterminated IRI")),
                    }
                }
                out.push((at, Token::Iri(iri)));
            }
            '"' => {
                it.next();
                let mut s = String::new();
                loop {
                    match it.next() {
                        Some((_, '"')) => break,
                        Some((p, '\\')) => match it.next() {
                            Some((_, 'n')) => s.push('\n'),
                            Some((_, 'r')) => s.push('\r'),
                            Some((_, 't')) => s.push('\t'),
                            Some((_, '"')) => s.push('"'),
                            Some((_, '\\')) => s.push('\\'),
                            _ => return Err(err(p, "bad escape")),
                        },
                        Some((_, c)) => s.push(c),
                        None => return Err(err(at, "unterminated string")),
                    }
                }
                out.push((at, Token::Str(s)));
            }
            c if c.is_ascii_digit() => {
                let mut n = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if c.is_ascii_digit() {
                        n.push(c);
                        it.next();
                    } else {
                        break;
                    }
                }
                out.push((at, Token::Int(n.parse().map_err(|_| err(at, "number too large"))?)));
            }
            c if c.is_ascii_alphabetic() => {
                let mut w = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if c.is_ascii_alphabetic() {
                        w.push(c);
                        it.next();
                    } else {
                        break;
                    }
                }
                out.push((at, Token::Word(w.to_ascii_uppercase())));
            }
            _ => return Err(err(at, &format!("unexpected character {c:?}"))),
        }
    }
    Ok(out)
}

pub fn parse_query(input: &str) -> Result<SelectQuery, QueryParseError> {
    let tokens = lex(input)?;
    let end = input.len();
    let mut pos = 0;
    let at = |pos: usize| tokens.get(pos).map_or(end, |(a, _)| *a);
    let fail = |pos: usize, message: &str| QueryParseError { at: at(pos), message: message.to_owned() };

    if tokens.get(pos).map(|t| &t.1) != Some(&Token::Word("SELECT".into())) {
        return Err(fail(pos, "expected SELECT"));
    }
    pos += 1;
    let mut vars = Vec::new();
    while let Some((_, Token::Var(v))) = tokens.get(pos) {
        vars.push(v.clone());
        pos += 1;
    }
    if vars.is_empty() {
        return Err(fail(pos, "expected at least one variable"));
    }
    if tokens.get(pos).map(|t| &t.1) != Some(&Token::Word("WHERE".into())) {
        return Err(fail(pos, "expected WHERE"));
    }
    pos += 1;
    if tokens.get(pos).map(|t| &t.1) != Some(&Token::Open) {
        return Err(fail(pos, "expected {"));
    }
    pos += 1;
    let mut patterns = Vec::new();
    loop {
        match tokens.get(pos).map(|t| &t.1) {
            Some(Token::Close) => {
                pos += 1;
                break;
            }
            None => return Err(fail(pos, "unterminated WHERE block")),
            _ => {}
        }
        let mut terms = Vec::with_capacity(3);
        for _ in 0..3 {
            let term = match tokens.get(pos).map(|t| &t.1) {
                Some(Token::Var(v)) => PatternTerm::Var(v.clone()),
                Some(Token::Iri(i)) => PatternTerm::Iri(Iri::new(i.clone()).map_err(|e| fail(pos, &e.to_string()))?),
                Some(Token::Str(s)) => PatternTerm::Literal(s.clone()),
                _ => return Err(fail(pos, "expected a term")),
            };
            terms.push(term);
            pos += 1;
        }
        let object = terms.pop().expect("three terms");
        let predicate = terms.pop().expect("three terms");
        let subject = terms.pop().expect("three terms");
        patterns.push(TriplePattern { subject, predicate, object });
        match tokens.get(pos).map(|t| &t.1) {
            Some(Token::Dot) => pos += 1,
            Some(Token::Close) => {}
            _ => return Err(fail(pos, "expected . or }")),
        }
    }
    let mut limit = None;
    if tokens.get(pos).map(|t| &t.1) == Some(&Token::Word("LIMIT".into())) {
        pos += 1;
        match tokens.get(pos).map(|t| &t.1) {
            Some(Token::Int(n)) => limit = Some(*n),
            _ => return Err(fail(pos, "expected a number after LIMIT")),
        }
        pos += 1;
    }
    if pos != tokens.len() {
        return Err(fail(pos, "trailing input"));
    }
    let query = SelectQuery { vars, patterns, limit };
    query.validate().map_err(|e| QueryParseError { at: 0, message: e.to_string() })?;
    Ok(query)
}

pub type Binding = BTreeMap<String, Term>;

/// The concrete value of a pattern position, `None` for an unbound variable.
fn resolve(term: &PatternTerm, binding: &Binding) -> Option<Term> {
    match term {
        PatternTerm::Var(v) => binding.get(v).cloned(),
        PatternTerm::Iri(i) => Some(Term::iri(i.clone())),
        PatternTerm::Literal(s) => Some(Term::literal(Literal::typed(s.clone(), Datatype::Text))),
    }
}

/// `Err` when a bound value cannot stand in an IRI-only position.
fn iri_position(value: Option<Term>) -> Result<Option<Iri>, ()> {
    match value {
        None => Ok(None),
        Some(t) => t.as_iri().cloned().map(Some).ok_or(()),
    }
}

fn bind(binding: &mut Binding, term: &PatternTerm, value: Term) -> bool {
    match term {
        PatternTerm::Var(v) => match binding.get(v) {
            Some(existing) => existing == &value,
            None => {
                binding.insert(v.clone(), value);
                true
            }
        },
        _ => true,
    }
}

fn solve(kg: &KnowledgeGraph, patterns: &[TriplePattern], binding: Binding, out: &mut Vec<Binding>) {
    let Some((first, rest)) = patterns.split_first() else {
        out.push(binding);
        return;
    };
    let (Ok(s_iri), Ok(p_iri)) =
        (iri_position(resolve(&first.subject, &binding)), iri_position(resolve(&first.predicate, &binding)))
    else {
        return;
    };
    let o = resolve(&first.object, &binding);
    for t in kg.matching(s_iri.as_ref(), p_iri.as_ref(), o.as_ref()) {
        let mut next = binding.clone();
        if bind(&mut next, &first.subject, Term::iri(t.subject.clone()))
            && bind(&mut next, &first.predicate, Term::iri(t.predicate.clone()))
            && bind(&mut next, &first.object, t.object.clone())
        {
            solve(kg, rest, next, out);
        }
    }
}

/// Evaluates the basic graph pattern and projects the selected variables.
/// Rows are distinct and sorted by their lexical values, then `LIMIT` applies.
pub fn execute(kg: &KnowledgeGraph, query: &SelectQuery) -> Result<Vec<Vec<Term>>, QueryError> {
    query.validate()?;
    let mut bindings = Vec::new();
    solve(kg, &query.patterns, Binding::new(), &mut bindings);
    let mut rows: Vec<Vec<Term>> =
        bindings.into_iter().map(|b| query.vars.iter().map(|v| b[v].clone()).collect()).collect();
    rows.sort_by(|a, b| {
        let key = |r: &Vec<Term>| r.iter().map(|t| t.lexical().to_owned()).collect::<Vec<_>>();
        key(a).cmp(&key(b)).then_with(|| a.cmp(b))
    });
    rows.dedup();
    if let Some(n) = query.limit {
        rows.truncate(n);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{vocab, Entity, Method, Ontology, Provenance, Triple, ValidationMode};

    #[test]
    fn render_parse_round_trip() {
        let q = SelectQuery {
            vars: vec!["r".into(), "content".into()],
            patterns: vec![
                TriplePattern {
                    subject: PatternTerm::Var("r".into()),
                    predicate: PatternTerm::Iri(vocab::iri(vocab::ROLE_TYPE)),
                    object: PatternTerm::Literal("Defi\"nition\\\n".into()),
                },
                TriplePattern {
                    subject: PatternTerm::Var("r".into()),
                    predicate: PatternTerm::Iri(vocab::iri(vocab::CONTENT)),
                    object: PatternTerm::Var("content".into()),
                },
            ],
            limit: Some(3),
        };
        assert_eq!(parse_query(&q.to_string()).unwrap(), q);
        assert!(parse_query("SELECT ?v WHERE { }").is_err());
        assert!(parse_query("SELECT ?v WHERE { ?a ?b ?c }").is_err());
        assert!(parse_query("SELECT ?v WHERE { ?v <http://x/p> \"x\" } extra").is_err());
        assert!(parse_query("select ?v where { ?v <http://x/p> ?o . } limit 2").is_ok());
    }

    #[test]
    fn joins_and_sorts() {
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        let class = vocab::iri(vocab::CONCEPT);
        for s in ["a", "b"] {
            kg.add_entity(Entity::concept(Iri::local("concept", s), s, class.clone()), ValidationMode::Lax).unwrap();
        }
        let p = vocab::iri(vocab::CONTENT);
        for (s, v) in [("a", "zeta"), ("a", "alpha"), ("b", "mid")] {
            let t = Triple::new(Iri::local("concept", s), p.clone(), Term::text(v), Provenance::new("t", Method::Human, 1.0));
            kg.add_triple(t, ValidationMode::Lax).unwrap();
        }
        let q = parse_query(&format!("SELECT ?v WHERE {{ <{}> <{p}> ?v }}", Iri::local("concept", "a"))).unwrap();
        let rows = execute(&kg, &q).unwrap();
        assert_eq!(rows.iter().map(|r| r[0].lexical()).collect::<Vec<_>>(), ["alpha", "zeta"]);
        let q = parse_query(&format!("SELECT ?s ?v WHERE {{ ?s <{p}> ?v }} LIMIT 2")).unwrap();
        assert_eq!(execute(&kg, &q).unwrap().len(), 2);
    }
}
