//! Entity linking over heterogeneous records: mention detection, candidate
//! generation, context-based disambiguation with a NIL threshold, storage of
//! linked records, and exact-span evaluation.

use thiserror::Error;

mod eval;
mod pipeline;
mod record;

pub use eval::{evaluate_linking, f1, parse_gold_jsonl, render_table, EvalReport, GoldLink};
pub use pipeline::{
    candidate_text, datum_iri, detect_mentions, disambiguate, gen_candidates, index_record, mention_gazetteer,
    store_links, IndexReport, LinkConfig, LinkResult, Linker, Mention, MentionKind, RoleCues, TraceEntry,
    DEFAULT_TAU_NIL,
};
pub use record::{build_context, parse_records_jsonl, HeteroRecord};

use crate::model::GraphError;
use crate::textindex::{DimensionMismatch, EmbedError, SearchError};

#[derive(Debug, Error)]
pub enum EduLinkError {
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
