//! Command line and HTTP/JSON front ends over one [`Engine`].

use thiserror::Error;

mod cli;
mod config;
mod engine;
mod http;

pub use cli::{run_cli, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};
pub use config::{Config, Paths};
pub use engine::{
    graph_from_statements, load_graph, AddCandidateRequest, CreateSession, Engine, IngestReport, LabelRequest, GRAPH_MATCH_SCORE,
};
pub use http::{router, serve};

use crate::acquisition::AcquisitionError;
use crate::consolidation::ConsolidationError;
use crate::edulink::EduLinkError;
use crate::ingest::{ExerciseError, SegmentError, TopicError};
use crate::model::{GraphError, OntologyError, PersistError};
use crate::model::ntriples::ParseError;
use crate::qa::QaError;
use crate::textindex::{EmbedError, IndexFileError, SearchError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("config: {0}")]
    Config(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already exists")]
    SessionExists(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    IndexFile(#[from] IndexFileError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Consolidation(#[from] ConsolidationError),
    #[error(transparent)]
    Link(#[from] EduLinkError),
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Exercise(#[from] ExerciseError),
}

impl GatewayError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        GatewayError::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        use AcquisitionError as A;
        match self {
            GatewayError::BadRequest(_) | GatewayError::Search(SearchError::EmptyQuery) => 400,
            GatewayError::Acquisition(A::BadSpan { .. } | A::InvalidAlpha(_)) => 400,
            GatewayError::Link(EduLinkError::InvalidRecord { .. } | EduLinkError::Json { .. }) => 400,
            GatewayError::Qa(QaError::NoTemplate(_) | QaError::Parse(_)) => 400,
            GatewayError::Consolidation(ConsolidationError::ThresholdOutOfRange(_) | ConsolidationError::Json(_)) => 400,
            GatewayError::UnknownSession(_) | GatewayError::Acquisition(A::UnknownCandidate(_)) => 404,
            GatewayError::Qa(QaError::EntityUnresolved(_)) => 404,
            GatewayError::SessionExists(_) | GatewayError::Graph(GraphError::EntityConflict(_)) => 409,
            GatewayError::Acquisition(
                A::StageViolation(_) | A::StageIncomplete { .. } | A::UnresolvedPredicate(_) | A::DuplicateCandidate(_),
            ) => 409,
            _ => 500,
        }
    }
}
