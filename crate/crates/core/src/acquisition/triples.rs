//! Triple-candidate generation: infobox alignment, same-sentence
//! co-occurrence, and open extraction with predicate canonicalization.

use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::candidates::Status;
use super::AcquisitionError;
use crate::model::{vocab, ExternalKg, Iri, KnowledgeGraph, Ontology, PropertyDef, PropertyKind, Term};
use crate::textindex::{sentence_of, split_sentences, EmbedError, EmbeddingProvider, TokenizerConfig};

pub const DEFAULT_TAU_MAP: f64 = 0.5;
const COOCCURRENCE_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PredicateRef {
    Property { iri: Iri },
    /// Open-extraction predicate with no ontology property close enough.
    Raw { text: String },
    /// Left for the annotator to choose.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Origin {
    Infobox,
    Cooccurrence,
    Openie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TripleCandidate {
    /// `tri:{n}`, numbered in generation order.
    pub id: String,
    pub head: Iri,
    /// Entity candidate whose confidence the committed triple carries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_candidate: Option<String>,
    pub predicate: PredicateRef,
    pub tail: Term,
    pub origin: Origin,
    pub score: f64,
    /// Id of the external statement an infobox candidate came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_triple: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<usize>,
    pub status: Status,
}

/// An entity accepted and committed in the entity stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AcceptedEntity {
    pub candidate_id: String,
    pub iri: Iri,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<Iri>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OpenIeTriple {
    pub head: String,
    pub predicate: String,
    pub tail: String,
    #[serde(default)]
    pub sentence_idx: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct OpenIeResponse {
    triples: Vec<OpenIeTriple>,
}

pub trait OpenIeExtractor: Send + Sync {
    fn extract(&self, text: &str) -> Result<Vec<OpenIeTriple>, AcquisitionError>;
}

/// Returns the same triples for every text.
#[derive(Debug, Clone, Default)]
pub struct StaticOpenIe(pub Vec<OpenIeTriple>);

impl OpenIeExtractor for StaticOpenIe {
    fn extract(&self, _text: &str) -> Result<Vec<OpenIeTriple>, AcquisitionError> {
        Ok(self.0.clone())
    }
}

/// Runs a program with the text on stdin; it must print
/// `{"triples":[{head,predicate,tail,sentenceIdx}]}`.
#[derive(Debug, Clone)]
pub struct CommandOpenIe {
    pub program: String,
    pub args: Vec<String>,
}

impl OpenIeExtractor for CommandOpenIe {
    fn extract(&self, text: &str) -> Result<Vec<OpenIeTriple>, AcquisitionError> {
        let fail = |msg: String| AcquisitionError::Extractor(format!("{}: {msg}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        child.stdin.take().expect("piped").write_all(text.as_bytes()).map_err(|e| fail(e.to_string()))?;
        let output = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        if !output.status.success() {
            return Err(fail(format!("exited with {}: {}", output.status, String::from_utf8_lossy(&output.stderr).trim())));
        }
        let response: OpenIeResponse = serde_json::from_slice(&output.stdout).map_err(|e| fail(e.to_string()))?;
        Ok(response.triples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
pub enum Canonical {
    Mapped { iri: Iri, similarity: f64 },
    Unmapped { best: Option<(Iri, f64)> },
}

/// The property whose label embedding is closest to `raw`, if that cosine
/// reaches `tau_map`. Ties go to the smaller iri.
pub fn canonicalize_predicate(
    raw: &str,
    properties: &[&PropertyDef],
    provider: &dyn EmbeddingProvider,
    tau_map: f64,
) -> Result<Canonical, EmbedError> {
    let query = provider.embed(raw)?;
    let mut sorted: Vec<&&PropertyDef> = properties.iter().collect();
    sorted.sort_by(|a, b| a.iri.cmp(&b.iri));
    let mut best: Option<(Iri, f64)> = None;
    for p in sorted {
        let sim = query.cosine(&provider.embed(&p.label)?)?;
        if best.as_ref().is_none_or(|(_, b)| sim > *b) {
            best = Some((p.iri.clone(), sim));
        }
    }
    Ok(match best {
        Some((iri, similarity)) if similarity >= tau_map => Canonical::Mapped { iri, similarity },
        best => Canonical::Unmapped { best },
    })
}

/// Properties open extraction and infobox alignment may map onto: every
/// property of the requested kind except the engine's own bookkeeping ones.
pub fn mappable_properties(ontology: &Ontology, kind: PropertyKind) -> Vec<&PropertyDef> {
    let internal = [
        vocab::PARENT_CONCEPT,
        vocab::ROLE_TYPE,
        vocab::CONTENT,
        vocab::MENTIONS_CONCEPT,
        vocab::INDEXED_BY,
        vocab::EXTERNAL_EQUIVALENT,
        vocab::RAW_ASSERTION,
    ];
    ontology.properties().filter(|p| p.kind == kind && !internal.contains(&p.iri.as_str())).collect()
}

pub struct TripleSources<'a> {
    pub external: Option<&'a ExternalKg>,
    pub openie: Option<&'a dyn OpenIeExtractor>,
    pub provider: &'a dyn EmbeddingProvider,
    pub tau_map: f64,
}

/// Candidates for one section, in the order infobox, co-occurrence, open
/// extraction. Identical (head, predicate, tail) proposals are emitted once.
pub fn gen_triple_candidates(
    text: &str,
    accepted: &[AcceptedEntity],
    kg: &KnowledgeGraph,
    sources: &TripleSources<'_>,
) -> Result<Vec<TripleCandidate>, AcquisitionError> {
    let sentences = split_sentences(text);
    let mut out = Vec::new();
    let mut seen: BTreeSet<(Iri, String, String)> = BTreeSet::new();
    let mut push = |mut c: TripleCandidate, out: &mut Vec<TripleCandidate>| {
        let key = (c.head.clone(), serde_json::to_string(&c.predicate).expect("json"), serde_json::to_string(&c.tail).expect("json"));
        if seen.insert(key) {
            c.id = format!("tri:{}", out.len() + 1);
            out.push(c);
        }
    };
    let norm = TokenizerConfig::default();
    let normalized_text = norm.normalize(text);
    let datatype_props = mappable_properties(kg.ontology(), PropertyKind::Datatype);
    let object_props = mappable_properties(kg.ontology(), PropertyKind::Object);

    if let Some(ext) = sources.external {
        for entity in accepted {
            let Some(external) = &entity.external else { continue };
            for fact in ext.infobox(external) {
                let needle = norm.normalize(&fact.object.lexical);
                let Some(byte) = normalized_text.find(&needle).filter(|_| !needle.trim().is_empty()) else { continue };
                let at = normalized_text[..byte].chars().count();
                let predicate = match canonicalize_predicate(&fact.predicate_label, &datatype_props, sources.provider, sources.tau_map)? {
                    Canonical::Mapped { iri, .. } => PredicateRef::Property { iri },
                    Canonical::Unmapped { .. } => PredicateRef::Raw { text: fact.predicate_label.clone() },
                };
                push(
                    TripleCandidate {
                        id: String::new(),
                        head: entity.iri.clone(),
                        head_candidate: Some(entity.candidate_id.clone()),
                        predicate,
                        tail: Term::literal(fact.object.clone()),
                        origin: Origin::Infobox,
                        score: 1.0,
                        source_triple: Some(fact.id.clone()),
                        sentence: sentence_of(&sentences, at),
                        status: Status::Pending,
                    },
                    &mut out,
                );
            }
        }
    }

    for (k, &(s, e)) in sentences.iter().enumerate() {
        let mut inside: Vec<&AcceptedEntity> = accepted.iter().filter(|a| a.start >= s && a.end <= e).collect();
        inside.sort_by_key(|a| (a.start, a.end));
        for (i, head) in inside.iter().enumerate() {
            for tail in &inside[i + 1..] {
                if head.iri == tail.iri {
                    continue;
                }
                let (a, b) = if head.iri < tail.iri { (&head.iri, &tail.iri) } else { (&tail.iri, &head.iri) };
                let reverse_seen = out.iter().any(|c: &TripleCandidate| {
                    c.origin == Origin::Cooccurrence && c.head == *b && c.tail.as_iri() == Some(a)
                });
                if reverse_seen {
                    continue;
                }
                push(
                    TripleCandidate {
                        id: String::new(),
                        head: head.iri.clone(),
                        head_candidate: Some(head.candidate_id.clone()),
                        predicate: PredicateRef::Unresolved,
                        tail: Term::iri(tail.iri.clone()),
                        origin: Origin::Cooccurrence,
                        score: COOCCURRENCE_SCORE,
                        source_triple: None,
                        sentence: Some(k),
                        status: Status::Pending,
                    },
                    &mut out,
                );
            }
        }
    }

    if let Some(openie) = sources.openie {
        let find = |surface: &str| {
            let key = norm.normalize(surface.trim());
            accepted.iter().find(|a| norm.normalize(&a.surface) == key || norm.normalize(&a.label) == key)
        };
        for t in openie.extract(text)? {
            let Some(head) = find(&t.head) else { continue };
            let tail_entity = find(&t.tail);
            let tail = match tail_entity {
                Some(a) => Term::iri(a.iri.clone()),
                None => Term::text(t.tail.trim()),
            };
            let props = if tail_entity.is_some() { &object_props } else { &datatype_props };
            let (predicate, score) = match canonicalize_predicate(&t.predicate, props, sources.provider, sources.tau_map)? {
                Canonical::Mapped { iri, similarity } => (PredicateRef::Property { iri }, similarity),
                Canonical::Unmapped { best } => {
                    (PredicateRef::Raw { text: t.predicate.trim().to_owned() }, best.map_or(0.0, |b| b.1))
                }
            };
            push(
                TripleCandidate {
                    id: String::new(),
                    head: head.iri.clone(),
                    head_candidate: Some(head.candidate_id.clone()),
                    predicate,
                    tail,
                    origin: Origin::Openie,
                    score: score.clamp(0.0, 1.0),
                    source_triple: None,
                    sentence: t.sentence_idx,
                    status: Status::Pending,
                },
                &mut out,
            );
        }
    }
    Ok(out)
}
