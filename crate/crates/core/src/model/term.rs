use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::iri::Iri;

/// The closed taxonomy of rhetorical roles attached to knowledge concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoleType {
    Definition,
    Process,
    Mechanism,
    Reason,
    Effect,
    Significance,
    Condition,
}

impl RoleType {
    pub const ALL: [RoleType; 7] = [
        RoleType::Definition,
        RoleType::Process,
        RoleType::Mechanism,
        RoleType::Reason,
        RoleType::Effect,
        RoleType::Significance,
        RoleType::Condition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleType::Definition => "Definition",
            RoleType::Process => "Process",
            RoleType::Mechanism => "Mechanism",
            RoleType::Reason => "Reason",
            RoleType::Effect => "Effect",
            RoleType::Significance => "Significance",
            RoleType::Condition => "Condition",
        }
    }
}

impl fmt::Display for RoleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role type {0:?}")]
pub struct UnknownRoleType(pub String);

impl FromStr for RoleType {
    type Err = UnknownRoleType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoleType::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownRoleType(s.to_owned()))
    }
}

/// Literal datatype tag. Unrecognized tags are read as [`Datatype::Text`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Text,
    Integer,
    Decimal,
    Date,
}

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

impl Datatype {
    pub fn tag(self) -> &'static str {
        match self {
            Datatype::Text => "text",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Date => "date",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Datatype> {
        match tag {
            "text" => Some(Datatype::Text),
            "integer" => Some(Datatype::Integer),
            "decimal" => Some(Datatype::Decimal),
            "date" => Some(Datatype::Date),
            _ => None,
        }
    }

    /// The XSD IRI written after `^^` in N-Triples. Text literals are plain.
    pub fn xsd_iri(self) -> Option<String> {
        match self {
            Datatype::Text => None,
            other => Some(format!("{XSD}{}", other.tag())),
        }
    }

    pub fn from_xsd_iri(iri: &str) -> Datatype {
        iri.strip_prefix(XSD)
            .and_then(Datatype::from_tag)
            .unwrap_or(Datatype::Text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub lexical: String,
    pub datatype: Datatype,
}

impl Literal {
    pub fn text(lexical: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: Datatype::Text }
    }

    pub fn typed(lexical: impl Into<String>, datatype: Datatype) -> Self {
        Literal { lexical: lexical.into(), datatype }
    }
}

/// The object position of a triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Term {
    Iri { value: Iri },
    Literal { value: Literal },
}

impl Term {
    pub fn iri(iri: Iri) -> Self {
        Term::Iri { value: iri }
    }

    pub fn literal(literal: Literal) -> Self {
        Term::Literal { value: literal }
    }

    pub fn text(lexical: impl Into<String>) -> Self {
        Term::literal(Literal::text(lexical))
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri { value } => Some(value),
            Term::Literal { .. } => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal { value } => Some(value),
            Term::Iri { .. } => None,
        }
    }

    /// The IRI string or literal lexical form.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri { value } => value.as_str(),
            Term::Literal { value } => &value.lexical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ner,
    El,
    Openie,
    Infobox,
    Cooccurrence,
    Human,
    Expansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub method: Method,
    pub confidence: f64,
}

impl Provenance {
    pub fn new(source_id: impl Into<String>, method: Method, confidence: f64) -> Self {
        Provenance { source_id: source_id.into(), method, confidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
    pub provenance: Provenance,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: Term, provenance: Provenance) -> Self {
        Triple { subject, predicate, object, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntityKind {
    Concept,
    RhetoricalRole { role: RoleType },
    Resource { resource_kind: String },
    ExternalDatum { format: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub iri: Iri,
    pub label: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    #[serde(default)]
    pub description: String,
    pub class_iri: Iri,
    pub kind: EntityKind,
}

impl Entity {
    pub fn concept(iri: Iri, label: impl Into<String>, class_iri: Iri) -> Self {
        Entity {
            iri,
            label: label.into(),
            aliases: BTreeSet::new(),
            description: String::new(),
            class_iri,
            kind: EntityKind::Concept,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_alias(mut self, alias: impl Into<String>) -> Self {
        self.aliases.insert(alias.into());
        self
    }

    pub fn role_type(&self) -> Option<RoleType> {
        match self.kind {
            EntityKind::RhetoricalRole { role } => Some(role),
            _ => None,
        }
    }

    /// Label and description joined by one space, the text compared by
    /// embedding similarity.
    pub fn similarity_text(&self) -> String {
        join_label_description(&self.label, &self.description)
    }
}

pub fn join_label_description(label: &str, description: &str) -> String {
    if description.is_empty() {
        label.to_owned()
    } else {
        format!("{label} {description}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_type_parse_round_trip() {
        for role in RoleType::ALL {
            assert_eq!(role.as_str().parse::<RoleType>().unwrap(), role);
        }
        assert_eq!("effect".parse::<RoleType>().unwrap(), RoleType::Effect);
        assert!("Summary".parse::<RoleType>().is_err());
    }

    #[test]
    fn unknown_xsd_reads_as_text() {
        assert_eq!(Datatype::from_xsd_iri("http://www.w3.org/2001/XMLSchema#integer"), Datatype::Integer);
        assert_eq!(Datatype::from_xsd_iri("http://www.w3.org/2001/XMLSchema#gYear"), Datatype::Text);
        assert_eq!(Datatype::Text.xsd_iri(), None);
    }
}
