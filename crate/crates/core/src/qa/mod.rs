//! Template question answering: a trigger phrase picks a datatype property
//! or a rhetorical role, the rest of the question names the entity, and the
//! resulting query runs against the graph.

use thiserror::Error;

mod sparql;
mod templates;

pub use sparql::{execute, parse_query, PatternTerm, QueryError, QueryParseError, SelectQuery, TriplePattern, MAX_PATTERNS};
pub use templates::{
    answer, build_query, execute_plan, match_template, role_route_templates, to_query, Answer, QaTarget, QueryPlan,
    QuestionTemplate, TemplateMatch, TemplateSet, ROLE_ROUTE_PRIORITY,
};

use crate::edulink::EduLinkError;
use crate::textindex::SearchError;

#[derive(Debug, Error)]
pub enum QaError {
    #[error("no template matches {0:?}")]
    NoTemplate(String),
    #[error("no entity found in {0:?}")]
    EntityUnresolved(String),
    #[error("template: {0}")]
    Template(String),
    #[error("query is not a property or role lookup: {0}")]
    UnsupportedQuery(String),
    #[error(transparent)]
    Parse(#[from] QueryParseError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Link(#[from] EduLinkError),
    #[error(transparent)]
    Search(#[from] SearchError),
}
