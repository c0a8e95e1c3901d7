use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::iri::Iri;
use super::term::Datatype;
use super::vocab;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyClass {
    pub iri: Iri,
    pub label: String,
    #[serde(default)]
    pub parent: Option<Iri>,
    #[serde(default)]
    pub subjects: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Object,
    Datatype,
}

/// Range of a property: a literal datatype tag or a class IRI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyRange {
    Literal(Datatype),
    Class(Iri),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyDef {
    pub iri: Iri,
    pub label: String,
    pub kind: PropertyKind,
    #[serde(default)]
    pub domain: Option<Iri>,
    #[serde(default)]
    pub range: Option<PropertyRange>,
}

/// On-disk shape of an ontology: `{ "classes": [...], "properties": [...] }`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OntologySchema {
    #[serde(default)]
    pub classes: Vec<OntologyClass>,
    #[serde(default)]
    pub properties: Vec<PropertyDef>,
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("duplicate class {0}")]
    DuplicateClass(Iri),
    #[error("duplicate property {0}")]
    DuplicateProperty(Iri),
    #[error("class {class} has unknown parent {parent}")]
    UnknownParent { class: Iri, parent: Iri },
    #[error("class hierarchy contains a cycle through {0}")]
    Cycle(Iri),
    #[error("property {0} has a range that does not match its kind")]
    RangeKindMismatch(Iri),
    #[error("property {property} has unknown domain {domain}")]
    UnknownDomain { property: Iri, domain: Iri },
    #[error("property {property} has unknown range class {range}")]
    UnknownRange { property: Iri, range: Iri },
    #[error("reading ontology: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing ontology: {0}")]
    Json(#[from] serde_json::Error),
}

/// A validated class forest plus property table. The built-in classes and
/// properties are always present, so schema files may refer to them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OntologySchema", into = "OntologySchema")]
pub struct Ontology {
    classes: BTreeMap<Iri, OntologyClass>,
    properties: BTreeMap<Iri, PropertyDef>,
}

impl Ontology {
    pub fn from_schema(schema: OntologySchema) -> Result<Self, OntologyError> {
        let mut classes = BTreeMap::new();
        for class in schema.classes {
            if classes.contains_key(&class.iri) {
                return Err(OntologyError::DuplicateClass(class.iri));
            }
            classes.insert(class.iri.clone(), class);
        }
        let mut properties = BTreeMap::new();
        for prop in schema.properties {
            if properties.contains_key(&prop.iri) {
                return Err(OntologyError::DuplicateProperty(prop.iri));
            }
            properties.insert(prop.iri.clone(), prop);
        }
        let ontology = Ontology { classes, properties }.with_builtins();
        ontology.validate()?;
        Ok(ontology)
    }

    pub fn from_json(json: &str) -> Result<Self, OntologyError> {
        let schema: OntologySchema = serde_json::from_str(json)?;
        Self::from_schema(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// An ontology holding only the engine's built-in vocabulary.
    pub fn builtin() -> Self {
        Ontology::default().with_builtins()
    }

    /// Adds the built-in classes and properties that are not yet declared.
    pub fn with_builtins(mut self) -> Self {
        let class = |iri: &'static str, label: &str, parent: Option<&'static str>| OntologyClass {
            iri: vocab::iri(iri),
            label: label.to_owned(),
            parent: parent.map(vocab::iri),
            subjects: BTreeSet::new(),
        };
        let builtin_classes = [
            class(vocab::KNOWLEDGE_TOPIC, "Knowledge Topic", None),
            class(vocab::CONCEPT, "Knowledge Concept", Some(vocab::KNOWLEDGE_TOPIC)),
            class(vocab::RHETORICAL_ROLE, "Rhetorical Role", Some(vocab::KNOWLEDGE_TOPIC)),
            class(vocab::RESOURCE, "Educational Resource", None),
            class(vocab::EXTERNAL_DATUM, "External Heterogeneous Data", None),
        ];
        for c in builtin_classes {
            self.classes.entry(c.iri.clone()).or_insert(c);
        }
        let object = |iri: &'static str, label: &str| PropertyDef {
            iri: vocab::iri(iri),
            label: label.to_owned(),
            kind: PropertyKind::Object,
            domain: None,
            range: None,
        };
        let datatype = |iri: &'static str, label: &str| PropertyDef {
            iri: vocab::iri(iri),
            label: label.to_owned(),
            kind: PropertyKind::Datatype,
            domain: None,
            range: Some(PropertyRange::Literal(Datatype::Text)),
        };
        let builtin_properties = [
            object(vocab::PARENT_CONCEPT, "parent concept"),
            object(vocab::MENTIONS_CONCEPT, "mentions concept"),
            object(vocab::INDEXED_BY, "indexed by"),
            object(vocab::EXTERNAL_EQUIVALENT, "external equivalent"),
            datatype(vocab::ROLE_TYPE, "role type"),
            datatype(vocab::CONTENT, "content"),
            datatype(vocab::RAW_ASSERTION, "raw assertion"),
            datatype(vocab::LABEL, "label"),
            datatype(vocab::DESCRIPTION, "description"),
        ];
        for p in builtin_properties {
            self.properties.entry(p.iri.clone()).or_insert(p);
        }
        self
    }

    fn validate(&self) -> Result<(), OntologyError> {
        for class in self.classes.values() {
            if let Some(parent) = &class.parent {
                if !self.classes.contains_key(parent) {
                    return Err(OntologyError::UnknownParent {
                        class: class.iri.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        // Walk each parent chain; a chain longer than the class count loops.
        for class in self.classes.values() {
            let mut current = class.parent.as_ref();
            let mut steps = 0;
            while let Some(parent) = current {
                steps += 1;
                if steps > self.classes.len() || parent == &class.iri {
                    return Err(OntologyError::Cycle(class.iri.clone()));
                }
                current = self.classes[parent].parent.as_ref();
            }
        }
        for prop in self.properties.values() {
            match (&prop.kind, &prop.range) {
                (PropertyKind::Object, Some(PropertyRange::Literal(_)))
                | (PropertyKind::Datatype, Some(PropertyRange::Class(_))) => {
                    return Err(OntologyError::RangeKindMismatch(prop.iri.clone()));
                }
                (_, Some(PropertyRange::Class(range))) if !self.classes.contains_key(range) => {
                    return Err(OntologyError::UnknownRange {
                        property: prop.iri.clone(),
                        range: range.clone(),
                    });
                }
                _ => {}
            }
            if let Some(domain) = &prop.domain {
                if !self.classes.contains_key(domain) {
                    return Err(OntologyError::UnknownDomain {
                        property: prop.iri.clone(),
                        domain: domain.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn class(&self, iri: &Iri) -> Option<&OntologyClass> {
        self.classes.get(iri)
    }

    pub fn property(&self, iri: &Iri) -> Option<&PropertyDef> {
        self.properties.get(iri)
    }

    pub fn classes(&self) -> impl Iterator<Item = &OntologyClass> {
        self.classes.values()
    }

    pub fn properties(&self) -> impl Iterator<Item = &PropertyDef> {
        self.properties.values()
    }

    pub fn datatype_properties(&self) -> impl Iterator<Item = &PropertyDef> {
        self.properties.values().filter(|p| p.kind == PropertyKind::Datatype)
    }

    /// True when `class` equals `ancestor` or descends from it.
    pub fn is_subclass_of(&self, class: &Iri, ancestor: &Iri) -> bool {
        let mut current = Some(class);
        while let Some(iri) = current {
            if iri == ancestor {
                return true;
            }
            current = self.classes.get(iri).and_then(|c| c.parent.as_ref());
        }
        false
    }

    pub fn to_schema(&self) -> OntologySchema {
        OntologySchema {
            classes: self.classes.values().cloned().collect(),
            properties: self.properties.values().cloned().collect(),
        }
    }
}

impl TryFrom<OntologySchema> for Ontology {
    type Error = OntologyError;

    fn try_from(schema: OntologySchema) -> Result<Self, Self::Error> {
        Ontology::from_schema(schema)
    }
}

impl From<Ontology> for OntologySchema {
    fn from(ontology: Ontology) -> Self {
        ontology.to_schema()
    }
}
