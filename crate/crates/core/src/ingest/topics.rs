//! Key-topic scoring of textbook sections.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::markup::DocTree;
use crate::model::Iri;
use crate::textindex::{cosine_sparse, SparseVector, TfIdfModel, TokenizerConfig};

pub const DEFAULT_THETA_TOPIC: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopicEntry {
    pub concept_iri: Iri,
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl TopicEntry {
    /// Label and aliases joined by spaces; the text behind c's TF-IDF vector.
    pub fn text(&self) -> String {
        std::iter::once(self.label.as_str()).chain(self.aliases.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
    }

    fn surfaces(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.label.as_str()).chain(self.aliases.iter().map(String::as_str)).filter(|s| !s.trim().is_empty())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopicError {
    #[error("topic {0} has an empty label")]
    EmptyLabel(Iri),
    #[error("topic {0} listed twice")]
    DuplicateIri(Iri),
    #[error("section ordinal {ordinal} outside 1..={count}")]
    OrdinalOutOfRange { ordinal: usize, count: usize },
    #[error("invalid topic catalog: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct TopicCatalog {
    entries: Vec<TopicEntry>,
}

impl TopicCatalog {
    pub fn new(entries: Vec<TopicEntry>) -> Result<Self, TopicError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.label.trim().is_empty() {
                return Err(TopicError::EmptyLabel(e.concept_iri.clone()));
            }
            if !seen.insert(&e.concept_iri) {
                return Err(TopicError::DuplicateIri(e.concept_iri.clone()));
            }
        }
        Ok(TopicCatalog { entries })
    }

    pub fn from_json(json: &str) -> Result<Self, TopicError> {
        let entries: Vec<TopicEntry> = serde_json::from_str(json).map_err(|e| TopicError::Json(e.to_string()))?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[TopicEntry] {
        &self.entries
    }
}

impl<'de> Deserialize<'de> for TopicCatalog {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<TopicEntry>::deserialize(d)?;
        TopicCatalog::new(entries).map_err(serde::de::Error::custom)
    }
}

/// How earlier mentions gate a section's score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScoreMode {
    /// Factor is the product of O(d_j, c) over earlier sections: the topic
    /// must have been mentioned in every one of them.
    Literal,
    /// Factor is the product of 1 − O(d_j, c): the score survives only in
    /// the section where the topic first appears.
    #[default]
    FirstOccurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionTopicScore {
    pub section_ordinal: usize,
    pub concept_iri: Iri,
    pub score: f64,
    /// O(d_j, c) for j = 1..i-1.
    pub mention_vector: Vec<bool>,
}

/// Fits a TF-IDF model whose documents are the book's section texts.
pub fn book_tfidf(tree: &DocTree, tokenizer: TokenizerConfig) -> TfIdfModel {
    let texts: Vec<String> = tree.sections().map(|s| s.text()).collect();
    TfIdfModel::fit(texts.iter().map(String::as_str), tokenizer)
}

/// O(d, c): a label or alias occurs as a substring of the section after
/// the tokenizer's normalization.
pub fn mentions(section_text: &str, entry: &TopicEntry, tokenizer: &TokenizerConfig) -> bool {
    let text = tokenizer.normalize(section_text);
    entry.surfaces().any(|s| text.contains(&tokenizer.normalize(s)))
}

fn gate(mode: ScoreMode, mention_vector: &[bool]) -> f64 {
    mention_vector
        .iter()
        .map(|&o| {
            let o = if o { 1.0 } else { 0.0 };
            match mode {
                ScoreMode::Literal => o,
                ScoreMode::FirstOccurrence => 1.0 - o,
            }
        })
        .product()
}

pub fn section_topic_score(
    tree: &DocTree,
    entry: &TopicEntry,
    ordinal: usize,
    tfidf: &TfIdfModel,
    mode: ScoreMode,
) -> Result<SectionTopicScore, TopicError> {
    let texts: Vec<String> = tree.sections().map(|s| s.text()).collect();
    if ordinal == 0 || ordinal > texts.len() {
        return Err(TopicError::OrdinalOutOfRange { ordinal, count: texts.len() });
    }
    let mention_vector: Vec<bool> = texts[..ordinal - 1].iter().map(|t| mentions(t, entry, tfidf.tokenizer())).collect();
    let d = cosine_sparse(&tfidf.vector(&texts[ordinal - 1]), &tfidf.vector(&entry.text())).expect("same model");
    Ok(SectionTopicScore {
        section_ordinal: ordinal,
        concept_iri: entry.concept_iri.clone(),
        score: d * gate(mode, &mention_vector),
        mention_vector,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTopic {
    pub iri: Iri,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionTopics {
    pub section_id: String,
    pub ordinal: usize,
    pub topics: Vec<ScoredTopic>,
}

/// Topics with S > θ for every section, best first, ties by iri.
pub fn assign_key_topics(tree: &DocTree, catalog: &TopicCatalog, tfidf: &TfIdfModel, theta: f64, mode: ScoreMode) -> Vec<SectionTopics> {
    let sections: Vec<_> = tree.sections().collect();
    let texts: Vec<String> = sections.iter().map(|s| s.text()).collect();
    let section_vectors: Vec<SparseVector> = texts.iter().map(|t| tfidf.vector(t)).collect();
    let topic_vectors: Vec<SparseVector> = catalog.entries().iter().map(|e| tfidf.vector(&e.text())).collect();
    // mentioned[c][j] = O(d_{j+1}, c)
    let mentioned: Vec<Vec<bool>> =
        catalog.entries().iter().map(|e| texts.iter().map(|t| mentions(t, e, tfidf.tokenizer())).collect()).collect();

    sections
        .iter()
        .enumerate()
        .map(|(k, section)| {
            let mut topics: Vec<ScoredTopic> = catalog
                .entries()
                .iter()
                .enumerate()
                .filter_map(|(c, entry)| {
                    let d = cosine_sparse(&section_vectors[k], &topic_vectors[c]).expect("same model");
                    let score = d * gate(mode, &mentioned[c][..k]);
                    (score > theta).then(|| ScoredTopic { iri: entry.concept_iri.clone(), score })
                })
                .collect();
            topics.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.iri.cmp(&b.iri)));
            SectionTopics { section_id: section.id.clone(), ordinal: section.ordinal, topics }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{segment_textbook, HeadingRules};
    use crate::model::ValidationMode;

    fn tree() -> DocTree {
        segment_textbook(
            "phys",
            "<h1>Mechanics</h1><h2>Forces</h2>\
             <h3>Inertia</h3><p>an object keeps moving without force</p>\
             <h3>Mass</h3><p>mass measures inertia of an object</p>\
             <h3>Momentum</h3><p>momentum is mass times velocity</p>",
            &HeadingRules::default(),
            ValidationMode::Strict,
        )
        .unwrap()
    }

    fn entry(slug: &str, label: &str) -> TopicEntry {
        TopicEntry { concept_iri: Iri::local("concept", slug), label: label.into(), aliases: vec![] }
    }

    #[test]
    fn first_section_has_empty_product() {
        let t = tree();
        let model = book_tfidf(&t, TokenizerConfig::default());
        let c = entry("inertia", "inertia");
        for mode in [ScoreMode::Literal, ScoreMode::FirstOccurrence] {
            let s = section_topic_score(&t, &c, 1, &model, mode).unwrap();
            let d = cosine_sparse(&model.vector(&t.section(1).unwrap().text()), &model.vector("inertia")).unwrap();
            assert_eq!(s.score, d);
            assert!(s.mention_vector.is_empty());
        }
    }

    #[test]
    fn literal_gate_zeroes_unmentioned_and_first_occurrence_zeroes_repeats() {
        let t = tree();
        let model = book_tfidf(&t, TokenizerConfig::default());
        let velocity = entry("velocity", "velocity");
        let lit = section_topic_score(&t, &velocity, 3, &model, ScoreMode::Literal).unwrap();
        assert_eq!(lit.mention_vector, vec![false, false]);
        assert_eq!(lit.score, 0.0);
        let first = section_topic_score(&t, &velocity, 3, &model, ScoreMode::FirstOccurrence).unwrap();
        assert!(first.score > 0.0);
        let mass = entry("mass", "mass");
        let again = section_topic_score(&t, &mass, 3, &model, ScoreMode::FirstOccurrence).unwrap();
        assert_eq!(again.mention_vector, vec![false, true]);
        assert_eq!(again.score, 0.0);
    }

    #[test]
    fn out_of_range() {
        let t = tree();
        let model = book_tfidf(&t, TokenizerConfig::default());
        let c = entry("mass", "mass");
        assert_eq!(
            section_topic_score(&t, &c, 4, &model, ScoreMode::Literal),
            Err(TopicError::OrdinalOutOfRange { ordinal: 4, count: 3 })
        );
        assert!(section_topic_score(&t, &c, 0, &model, ScoreMode::Literal).is_err());
    }

    #[test]
    fn assignment_threshold_and_order() {
        let t = tree();
        let model = book_tfidf(&t, TokenizerConfig::default());
        let catalog =
            TopicCatalog::new(vec![entry("momentum", "momentum"), entry("velocity", "velocity"), entry("gravity", "gravity")]).unwrap();
        let out = assign_key_topics(&t, &catalog, &model, 0.0, ScoreMode::FirstOccurrence);
        assert_eq!(out.len(), 3);
        assert!(out[0].topics.is_empty());
        let s3: Vec<_> = out[2].topics.iter().map(|x| x.iri.as_str()).collect();
        // Both terms appear once in section 3 only, so the scores tie.
        assert_eq!(s3, vec!["edukg://concept/momentum", "edukg://concept/velocity"]);
        let strict = assign_key_topics(&t, &catalog, &model, 0.99, ScoreMode::FirstOccurrence);
        assert!(strict.iter().all(|s| s.topics.is_empty()));
    }

    #[test]
    fn catalog_validation() {
        assert!(matches!(TopicCatalog::new(vec![entry("a", " ")]), Err(TopicError::EmptyLabel(_))));
        assert!(matches!(TopicCatalog::new(vec![entry("a", "x"), entry("a", "y")]), Err(TopicError::DuplicateIri(_))));
        let c = TopicCatalog::from_json(r#"[{"conceptIri":"edukg://concept/x","label":"X","aliases":["ex"]}]"#).unwrap();
        assert_eq!(c.entries()[0].text(), "X ex");
    }
}
