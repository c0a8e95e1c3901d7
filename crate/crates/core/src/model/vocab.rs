//! Built-in classes and properties the engine itself writes. They are merged
//! into every loaded ontology so that engine-produced triples validate in
//! strict mode.

use super::iri::Iri;

pub const KNOWLEDGE_TOPIC: &str = "edukg://class/KnowledgeTopic";
pub const CONCEPT: &str = "edukg://class/KnowledgeConcept";
pub const RHETORICAL_ROLE: &str = "edukg://class/RhetoricalRole";
pub const RESOURCE: &str = "edukg://class/EducationalResource";
pub const EXTERNAL_DATUM: &str = "edukg://class/ExternalDatum";

pub const PARENT_CONCEPT: &str = "edukg://prop/parentConcept";
pub const ROLE_TYPE: &str = "edukg://prop/roleType";
pub const CONTENT: &str = "edukg://prop/content";
pub const MENTIONS_CONCEPT: &str = "edukg://prop/mentionsConcept";
pub const INDEXED_BY: &str = "edukg://prop/indexedBy";
pub const EXTERNAL_EQUIVALENT: &str = "edukg://prop/externalEquivalent";
pub const RAW_ASSERTION: &str = "edukg://prop/rawAssertion";
pub const LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const DESCRIPTION: &str = "http://schema.org/description";

pub fn iri(constant: &'static str) -> Iri {
    Iri::from_static(constant)
}
