//! Knowledge-graph construction and maintenance for curricular text.

pub mod model;
pub mod textindex;
pub mod ingest;
pub mod acquisition;
pub mod consolidation;
pub mod edulink;
pub mod qa;
pub mod gateway;
