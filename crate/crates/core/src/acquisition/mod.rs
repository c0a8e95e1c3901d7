//! Entity and triple candidates, confidence under human feedback, and the
//! two-stage annotation session.

use std::path::Path;

use thiserror::Error;

mod candidates;
mod session;
mod triples;

pub use candidates::{
    confidence, detect_candidates, rank_candidates, EntityCandidate, FeedbackMode, GazetteerRecognizer, Judgement,
    LinkerRecognizer, RecognizedSpan, Recognizer, Status, DEFAULT_ALPHA,
};
pub use session::{
    load_session, now_ms, AnnotationSession, CommitReport, EditPatch, SessionEvent, SessionLog, Stage, Verdict,
};
pub use triples::{
    canonicalize_predicate, gen_triple_candidates, mappable_properties, AcceptedEntity, Canonical, CommandOpenIe,
    OpenIeExtractor, OpenIeTriple, Origin, PredicateRef, StaticOpenIe, TripleCandidate, TripleSources, DEFAULT_TAU_MAP,
};

use crate::model::GraphError;
use crate::textindex::{DimensionMismatch, EmbedError};

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("no recognizer configured")]
    NoRecognizer,
    #[error("feedback weight must be a finite value >= 0, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("open extraction failed: {0}")]
    Extractor(String),
    #[error("unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("candidate {0} already exists")]
    DuplicateCandidate(String),
    #[error("span {start}..{end} is not inside a text of {len} chars")]
    BadSpan { start: usize, end: usize, len: usize },
    #[error("stage violation: {0}")]
    StageViolation(String),
    #[error("undecided candidates: {}", pending.join(", "))]
    StageIncomplete { pending: Vec<String> },
    #[error("accepted triple candidate {0} has no predicate")]
    UnresolvedPredicate(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("session log {path}: {source}")]
    Log { path: String, source: std::io::Error },
    #[error("cannot replay session: {0}")]
    Replay(String),
}

impl AcquisitionError {
    fn log(path: &Path, source: std::io::Error) -> Self {
        AcquisitionError::Log { path: path.display().to_string(), source }
    }
}
