//! Read-only view of an external knowledge graph loaded from N-Triples.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use super::iri::Iri;
use super::ntriples::{parse_ntriples, ParseError, Statement};
use super::term::{Literal, Term};
use super::vocab;

/// A literal-valued fact about an external entity, the raw material of
/// infobox triple candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoboxFact {
    /// `ext:{n}` where n is the statement's position in the source.
    pub id: String,
    pub subject: Iri,
    pub predicate: Iri,
    pub predicate_label: String,
    pub object: Literal,
}

#[derive(Debug, Clone, Default)]
pub struct ExternalKg {
    statements: Vec<Statement>,
    labels: BTreeMap<Iri, String>,
    descriptions: BTreeMap<Iri, String>,
    by_subject: BTreeMap<Iri, Vec<usize>>,
    /// Entity-valued links in both directions, keyed by either end.
    adjacency: BTreeMap<Iri, BTreeSet<Iri>>,
}

impl ExternalKg {
    pub fn from_statements(statements: Vec<Statement>) -> Self {
        let label_iri = vocab::iri(vocab::LABEL);
        let description_iri = vocab::iri(vocab::DESCRIPTION);
        let mut kg = ExternalKg { statements, ..Default::default() };
        for (k, st) in kg.statements.iter().enumerate() {
            kg.by_subject.entry(st.subject.clone()).or_default().push(k);
            match &st.object {
                Term::Literal { value } if st.predicate == label_iri => {
                    kg.labels.entry(st.subject.clone()).or_insert_with(|| value.lexical.clone());
                }
                Term::Literal { value } if st.predicate == description_iri => {
                    kg.descriptions.entry(st.subject.clone()).or_insert_with(|| value.lexical.clone());
                }
                Term::Iri { value } if *value != st.subject => {
                    kg.adjacency.entry(st.subject.clone()).or_default().insert(value.clone());
                    kg.adjacency.entry(value.clone()).or_default().insert(st.subject.clone());
                }
                _ => {}
            }
        }
        kg
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self, ParseError> {
        Ok(Self::from_statements(parse_ntriples(input)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParseError> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn label(&self, iri: &Iri) -> Option<&str> {
        self.labels.get(iri).map(String::as_str)
    }

    pub fn description(&self, iri: &Iri) -> Option<&str> {
        self.descriptions.get(iri).map(String::as_str)
    }

    /// Label and description joined by a space, or the local name when the
    /// entity has no label.
    pub fn similarity_text(&self, iri: &Iri) -> String {
        let label = self.label(iri).map_or_else(|| humanize_local_name(iri), str::to_owned);
        super::term::join_label_description(&label, self.description(iri).unwrap_or(""))
    }

    pub fn neighbours(&self, iri: &Iri) -> impl Iterator<Item = &Iri> {
        self.adjacency.get(iri).into_iter().flatten()
    }

    /// Subjects that carry a label, in iri order.
    pub fn labelled_entities(&self) -> impl Iterator<Item = (&Iri, &str)> {
        self.labels.iter().map(|(i, l)| (i, l.as_str()))
    }

    /// Literal-valued statements about `subject`, excluding label and
    /// description.
    pub fn infobox(&self, subject: &Iri) -> Vec<InfoboxFact> {
        let skip = [vocab::iri(vocab::LABEL), vocab::iri(vocab::DESCRIPTION)];
        self.by_subject
            .get(subject)
            .into_iter()
            .flatten()
            .filter_map(|&k| {
                let st = &self.statements[k];
                let object = st.object.as_literal()?;
                if skip.contains(&st.predicate) {
                    return None;
                }
                Some(InfoboxFact {
                    id: format!("ext:{k}"),
                    subject: st.subject.clone(),
                    predicate: st.predicate.clone(),
                    predicate_label: self.label(&st.predicate).map_or_else(|| humanize_local_name(&st.predicate), str::to_owned),
                    object: object.clone(),
                })
            })
            .collect()
    }
}

/// Last path or fragment segment of an iri, with camelCase and `_`
/// separators turned into spaces: `…/startTime` → "start time".
pub fn humanize_local_name(iri: &Iri) -> String {
    let s = iri.as_str();
    let local = s.rsplit(['/', '#', ':']).find(|p| !p.is_empty()).unwrap_or(s);
    let mut out = String::new();
    let mut prev_lower = false;
    for c in local.chars() {
        if c == '_' || c == '-' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        out.extend(c.to_lowercase());
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}
