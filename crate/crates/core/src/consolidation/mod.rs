//! Graph consolidation: concept expansion from an aligned external graph and
//! rhetorical-role extraction.

use thiserror::Error;

mod expansion;
mod roles;

pub use expansion::{
    expand_concepts, expansion_score, load_alignments, score_expansion_candidates, ExpansionReport, ExternalAlignment,
    ImportedConcept, ScoredExternal, DEFAULT_THETA,
};
pub use roles::{
    concept_gazetteer, consolidate_roles, default_role_templates, link_roles, materialize_role, recognize_roles,
    role_iri, role_source_values, RoleDraft, RoleRegistry, RoleReport, RoleTemplate,
};

use crate::model::{GraphError, Iri};
use crate::textindex::{DimensionMismatch, EmbedError};

#[derive(Debug, Error)]
pub enum ConsolidationError {
    #[error("{0} has no neighbours in the local graph")]
    IsolatedEntity(Iri),
    #[error("threshold must lie in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
    #[error("relation weight for {relation} must be finite and >= 0, got {weight}")]
    NegativeWeight { relation: String, weight: f64 },
    #[error("unknown entity {0}")]
    UnknownEntity(Iri),
    #[error("role template: {0}")]
    Template(String),
    #[error("{0}")]
    Json(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
