//! Ontology-typed entity/triple store with validation, provenance, and
//! N-Triples persistence.

mod external;
mod graph;
mod iri;
pub mod ntriples;
mod ontology;
pub mod persist;
mod shared;
mod term;
pub mod vocab;

pub use external::{humanize_local_name, ExternalKg, InfoboxFact};
pub use graph::{GraphError, KnowledgeGraph, StoredTriple, ValidationMode, ValidationWarning};
pub use iri::{slugify, Iri, IriError, LOCAL_SCHEME};
pub use ontology::{Ontology, OntologyClass, OntologyError, OntologySchema, PropertyDef, PropertyKind, PropertyRange};
pub use persist::{export_graph, import_graph, PersistError};
pub use shared::{SharedGraph, Snapshot};
pub use term::{
    join_label_description, Datatype, Entity, EntityKind, Literal, Method, Provenance, RoleType, Term, Triple,
    UnknownRoleType,
};
