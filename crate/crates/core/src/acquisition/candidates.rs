//! Entity-candidate detection and confidence under human feedback.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::AcquisitionError;
use crate::model::{EntityKind, Iri, KnowledgeGraph};
use crate::textindex::{char_slice, sentence_of, split_sentences, EmbeddingProvider, Gazetteer, InvertedIndex};

pub const DEFAULT_ALPHA: f64 = 0.1;

/// One span proposed by one recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecognizedSpan {
    pub start: usize,
    pub end: usize,
    pub class_iri: Iri,
    pub score: f64,
    /// Local entity the span already denotes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_iri: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_iri: Option<Iri>,
}

pub trait Recognizer: Send + Sync {
    fn name(&self) -> &str;

    /// Spans as char offsets into `text`.
    fn recognize(&self, text: &str) -> Result<Vec<RecognizedSpan>, AcquisitionError>;
}

#[derive(Debug, Clone, PartialEq)]
struct GazetteerEntry {
    class_iri: Iri,
    entity_iri: Option<Iri>,
    external_iri: Option<Iri>,
}

/// Dictionary recognizer: every longest non-overlapping match scores
/// `score`.
#[derive(Debug, Clone)]
pub struct GazetteerRecognizer {
    name: String,
    score: f64,
    gazetteer: Gazetteer<GazetteerEntry>,
}

impl GazetteerRecognizer {
    pub fn new(name: impl Into<String>, score: f64) -> Self {
        GazetteerRecognizer { name: name.into(), score, gazetteer: Gazetteer::new() }
    }

    pub fn insert(&mut self, surface: &str, class_iri: Iri, entity_iri: Option<Iri>, external_iri: Option<Iri>) {
        self.gazetteer.insert(surface, GazetteerEntry { class_iri, entity_iri, external_iri });
    }

    /// Labels and aliases of the graph's concepts.
    pub fn from_graph(name: impl Into<String>, score: f64, kg: &KnowledgeGraph) -> Self {
        let mut r = Self::new(name, score);
        for e in kg.entities().filter(|e| matches!(e.kind, EntityKind::Concept)) {
            for surface in std::iter::once(&e.label).chain(e.aliases.iter()) {
                r.insert(surface, e.class_iri.clone(), Some(e.iri.clone()), None);
            }
        }
        r
    }
}

impl Recognizer for GazetteerRecognizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn recognize(&self, text: &str) -> Result<Vec<RecognizedSpan>, AcquisitionError> {
        Ok(self
            .gazetteer
            .find_all(text)
            .into_iter()
            .map(|m| {
                let entry = &m.payloads[0];
                RecognizedSpan {
                    start: m.start,
                    end: m.end,
                    class_iri: entry.class_iri.clone(),
                    score: self.score,
                    entity_iri: entry.entity_iri.clone(),
                    external_iri: entry.external_iri.clone(),
                }
            })
            .collect())
    }
}

/// Finds labels of an external index in the text and links each match to
/// the indexed entity whose description best fits the surrounding
/// sentence; the span score is that cosine.
pub struct LinkerRecognizer {
    name: String,
    index: Arc<InvertedIndex>,
    gazetteer: Gazetteer<Iri>,
    provider: Arc<dyn EmbeddingProvider>,
    class_iri: Iri,
}

impl LinkerRecognizer {
    pub fn new(name: impl Into<String>, index: Arc<InvertedIndex>, provider: Arc<dyn EmbeddingProvider>, class_iri: Iri) -> Self {
        let mut gazetteer = Gazetteer::new();
        for e in index.entities() {
            for surface in std::iter::once(&e.label).chain(e.aliases.iter()) {
                gazetteer.insert(surface, e.iri.clone());
            }
        }
        LinkerRecognizer { name: name.into(), index, gazetteer, provider, class_iri }
    }
}

impl Recognizer for LinkerRecognizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn recognize(&self, text: &str) -> Result<Vec<RecognizedSpan>, AcquisitionError> {
        let sentences = split_sentences(text);
        let mut out = Vec::new();
        for m in self.gazetteer.find_all(text) {
            let (s, e) = sentence_of(&sentences, m.start).map_or((0, text.chars().count()), |k| sentences[k]);
            let context = self.provider.embed(&char_slice(text, s, e))?;
            let mut best: Option<(f64, &Iri)> = None;
            let mut candidates: Vec<&Iri> = m.payloads.iter().collect();
            candidates.sort();
            for iri in candidates {
                let entity = self.index.entity(iri).expect("gazetteer built from index");
                let description = if entity.description.is_empty() { &entity.label } else { &entity.description };
                let score = context.cosine(&self.provider.embed(description)?)?;
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, iri));
                }
            }
            if let Some((score, iri)) = best {
                out.push(RecognizedSpan {
                    start: m.start,
                    end: m.end,
                    class_iri: self.class_iri.clone(),
                    score: score.max(0.0),
                    entity_iri: None,
                    external_iri: Some(iri.clone()),
                });
            }
        }
        Ok(out)
    }
}

/// How labels move P(c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FeedbackMode {
    /// P = S + α·(pos − neg): rejections lower confidence.
    #[default]
    Signed,
    /// P = S + α·(pos + neg): every label raises confidence.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityCandidate {
    /// `ent:{start}-{end}`.
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    /// Label the committed entity gets; starts as the surface.
    pub label: String,
    pub suggested_class: Iri,
    pub base_score: f64,
    pub pos_count: u32,
    pub neg_count: u32,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_iri: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linked_external: Option<Iri>,
    pub status: Status,
}

pub fn confidence(base: f64, pos: u32, neg: u32, alpha: f64, mode: FeedbackMode) -> f64 {
    let feedback = match mode {
        FeedbackMode::Signed => f64::from(pos) - f64::from(neg),
        FeedbackMode::Literal => f64::from(pos) + f64::from(neg),
    };
    base + alpha * feedback
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Judgement {
    Accept,
    Reject,
}

impl EntityCandidate {
    /// Counts the label and recomputes P from the counts, so replaying the
    /// same labels always yields the same bits.
    pub fn update_confidence(&mut self, judgement: Judgement, alpha: f64, mode: FeedbackMode) {
        match judgement {
            Judgement::Accept => {
                self.pos_count += 1;
                self.status = Status::Accepted;
            }
            Judgement::Reject => {
                self.neg_count += 1;
                self.status = Status::Rejected;
            }
        }
        self.confidence = confidence(self.base_score, self.pos_count, self.neg_count, alpha, mode);
    }
}

/// P descending, ties by candidate id.
pub fn rank_candidates(candidates: &mut [EntityCandidate]) {
    candidates.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.id.cmp(&b.id)));
}

/// Runs every recognizer, merges overlapping spans into the longest one,
/// and sums the per-recognizer best scores into S, clamped to [0, 1].
pub fn detect_candidates(text: &str, recognizers: &[&dyn Recognizer]) -> Result<Vec<EntityCandidate>, AcquisitionError> {
    if recognizers.is_empty() {
        return Err(AcquisitionError::NoRecognizer);
    }
    let mut spans: Vec<(usize, RecognizedSpan)> = Vec::new();
    for (r, recognizer) in recognizers.iter().enumerate() {
        let text_len = text.chars().count();
        for span in recognizer.recognize(text)? {
            if span.start < span.end && span.end <= text_len {
                spans.push((r, span));
            }
        }
    }
    spans.sort_by(|a, b| a.1.start.cmp(&b.1.start).then(b.1.end.cmp(&a.1.end)).then(a.0.cmp(&b.0)));

    let mut clusters: Vec<Vec<(usize, RecognizedSpan)>> = Vec::new();
    let mut cluster_end = 0;
    for item in spans {
        match clusters.last_mut() {
            Some(cluster) if item.1.start < cluster_end => {
                cluster_end = cluster_end.max(item.1.end);
                cluster.push(item);
            }
            _ => {
                cluster_end = item.1.end;
                clusters.push(vec![item]);
            }
        }
    }

    let mut out: Vec<EntityCandidate> = clusters.into_iter().map(|cluster| merge_cluster(text, recognizers.len(), cluster)).collect();
    rank_candidates(&mut out);
    Ok(out)
}

fn merge_cluster(text: &str, recognizer_count: usize, cluster: Vec<(usize, RecognizedSpan)>) -> EntityCandidate {
    let longest = cluster
        .iter()
        .max_by(|a, b| {
            (a.1.end - a.1.start)
                .cmp(&(b.1.end - b.1.start))
                .then_with(|| b.1.start.cmp(&a.1.start))
                .then_with(|| a.1.score.total_cmp(&b.1.score).then_with(|| b.0.cmp(&a.0)))
        })
        .expect("nonempty cluster");
    let winner = &longest.1;
    let mut best_per_recognizer = vec![0.0f64; recognizer_count];
    for (r, span) in &cluster {
        best_per_recognizer[*r] = best_per_recognizer[*r].max(span.score);
    }
    let base = best_per_recognizer.iter().sum::<f64>().clamp(0.0, 1.0);
    let same_extent = || cluster.iter().filter(|(_, s)| s.start == winner.start && s.end == winner.end);
    let entity_iri = same_extent().find_map(|(_, s)| s.entity_iri.clone());
    let linked_external = same_extent().find_map(|(_, s)| s.external_iri.clone());
    let surface = char_slice(text, winner.start, winner.end);
    EntityCandidate {
        id: format!("ent:{}-{}", winner.start, winner.end),
        start: winner.start,
        end: winner.end,
        label: surface.clone(),
        surface,
        suggested_class: winner.class_iri.clone(),
        base_score: base,
        pos_count: 0,
        neg_count: 0,
        confidence: base,
        entity_iri,
        linked_external,
        status: Status::Pending,
    }
}
