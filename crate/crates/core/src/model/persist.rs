//! Graph dump: `graph.nt` holds one triple per line; `graph.meta.json` holds
//! the ontology, entity metadata, and per-line provenance.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{KnowledgeGraph, StoredTriple};
use super::ntriples::{self, ParseError};
use super::ontology::Ontology;
use super::term::{Entity, Provenance};

pub const META_FORMAT: &str = "kgforge-graph";
pub const META_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("sidecar json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Write(#[from] io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleProvenance {
    primary: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    audit: Vec<Provenance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    ontology: Ontology,
    entities: Vec<Entity>,
    /// Aligned with the statement lines of the triple file.
    provenance: Vec<TripleProvenance>,
}

/// Writes the triple lines to `triples` and the sidecar JSON to `meta`.
pub fn export_graph<W1: Write, W2: Write>(kg: &KnowledgeGraph, triples: &mut W1, meta: &mut W2) -> Result<(), PersistError> {
    for t in kg.triples() {
        ntriples::write_statement(triples, &t.subject, &t.predicate, &t.object)?;
    }
    let sidecar = Sidecar {
        format: META_FORMAT.into(),
        version: META_VERSION,
        ontology: kg.ontology().clone(),
        entities: kg.entities().cloned().collect(),
        provenance: kg
            .triples()
            .iter()
            .map(|t| TripleProvenance { primary: t.provenance.clone(), audit: t.audit.clone() })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut *meta, &sidecar)?;
    meta.write_all(b"\n")?;
    Ok(())
}

pub fn import_graph<R1: Read, R2: Read>(triples: R1, meta: R2) -> Result<KnowledgeGraph, PersistError> {
    let statements = ntriples::parse_ntriples(BufReader::new(triples))?;
    let sidecar: Sidecar = serde_json::from_reader(meta)?;
    if sidecar.format != META_FORMAT {
        return Err(PersistError::Sidecar(format!("unexpected format {:?}", sidecar.format)));
    }
    if sidecar.version != META_VERSION {
        return Err(PersistError::Sidecar(format!("unsupported version {}", sidecar.version)));
    }
    if sidecar.provenance.len() != statements.len() {
        return Err(PersistError::Sidecar(format!(
            "{} provenance records for {} triples",
            sidecar.provenance.len(),
            statements.len()
        )));
    }
    let mut kg = KnowledgeGraph::with_exact_ontology(sidecar.ontology);
    for entity in sidecar.entities {
        kg.insert_entity_unchecked(entity);
    }
    for (stmt, prov) in statements.into_iter().zip(sidecar.provenance) {
        kg.insert_stored(StoredTriple {
            subject: stmt.subject,
            predicate: stmt.predicate,
            object: stmt.object,
            provenance: prov.primary,
            audit: prov.audit,
        });
    }
    Ok(kg)
}

/// `graph.nt` → `graph.meta.json`.
pub fn sidecar_path(triples_path: &Path) -> PathBuf {
    let stem = triples_path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
    triples_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn save(kg: &KnowledgeGraph, triples_path: &Path) -> Result<(), PersistError> {
    let meta_path = sidecar_path(triples_path);
    let open = |p: &Path| File::create(p).map_err(|source| PersistError::Io { path: p.to_owned(), source });
    let mut t = BufWriter::new(open(triples_path)?);
    let mut m = BufWriter::new(open(&meta_path)?);
    export_graph(kg, &mut t, &mut m)?;
    t.flush()?;
    m.flush()?;
    Ok(())
}

pub fn load(triples_path: &Path) -> Result<KnowledgeGraph, PersistError> {
    let meta_path = sidecar_path(triples_path);
    let open = |p: &Path| File::open(p).map_err(|source| PersistError::Io { path: p.to_owned(), source });
    import_graph(open(triples_path)?, open(&meta_path)?)
}
