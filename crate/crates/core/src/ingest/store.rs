//! Writes ingestion results into a graph: catalog topics become concepts,
//! sections and exercises become resources that mention them.

use super::exercise::Exercise;
use super::markup::DocTree;
use super::topics::{SectionTopics, TopicCatalog};
use crate::model::{
    vocab, Entity, EntityKind, GraphError, Iri, KnowledgeGraph, Method, Provenance, Term, Triple, ValidationMode,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StoreReport {
    pub entities_added: usize,
    pub triples_added: usize,
}

fn resource(iri: Iri, label: &str, description: &str, kind: &str) -> Entity {
    Entity {
        kind: EntityKind::Resource { resource_kind: kind.to_owned() },
        ..Entity::concept(iri, label, vocab::iri(vocab::RESOURCE)).with_description(description)
    }
}

/// Adds every catalog topic not yet in the graph as a concept.
pub fn store_catalog(kg: &mut KnowledgeGraph, catalog: &TopicCatalog) -> Result<usize, GraphError> {
    let mut added = 0;
    for t in catalog.entries() {
        if kg.entity(&t.concept_iri).is_some() {
            continue;
        }
        let mut e = Entity::concept(t.concept_iri.clone(), t.label.clone(), vocab::iri(vocab::CONCEPT));
        e.aliases.extend(t.aliases.iter().cloned());
        added += usize::from(kg.add_entity(e, ValidationMode::Strict)?);
    }
    Ok(added)
}

pub fn section_iri(section_id: &str) -> Iri {
    Iri::local("section", section_id)
}

/// Sections as resources with a `mentionsConcept` triple per key topic,
/// confidence = the topic score.
pub fn store_book(
    kg: &mut KnowledgeGraph,
    tree: &DocTree,
    catalog: &TopicCatalog,
    topics: &[SectionTopics],
) -> Result<StoreReport, GraphError> {
    let mut report = StoreReport { entities_added: store_catalog(kg, catalog)?, triples_added: 0 };
    for section in tree.sections() {
        let iri = section_iri(&section.id);
        let first = section.paragraphs.first().map_or("", String::as_str);
        if kg.add_entity(resource(iri, &section.title, first, "section"), ValidationMode::Strict)? {
            report.entities_added += 1;
        }
    }
    let mentions = vocab::iri(vocab::MENTIONS_CONCEPT);
    for st in topics {
        for t in &st.topics {
            let triple = Triple::new(
                section_iri(&st.section_id),
                mentions.clone(),
                Term::iri(t.iri.clone()),
                Provenance::new(tree.book_id.clone(), Method::Ner, t.score.clamp(0.0, 1.0)),
            );
            report.triples_added += usize::from(kg.add_triple(triple, ValidationMode::Strict)?);
        }
    }
    Ok(report)
}

/// Exercises as resources linked to their topics.
pub fn store_exercises(kg: &mut KnowledgeGraph, exercises: &[Exercise]) -> Result<StoreReport, GraphError> {
    let mut report = StoreReport::default();
    let mentions = vocab::iri(vocab::MENTIONS_CONCEPT);
    for ex in exercises {
        let iri = Iri::local("exercise", &ex.id);
        let label: String = ex.question.chars().take(80).collect();
        let kind = serde_json::to_value(ex.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        if kg.add_entity(resource(iri.clone(), &label, &ex.question, &format!("exercise:{kind}")), ValidationMode::Strict)? {
            report.entities_added += 1;
        }
        let known: Vec<&Iri> = ex.linked_topics.iter().filter(|t| kg.entity(t).is_some()).collect();
        for topic in known {
            let triple = Triple::new(iri.clone(), mentions.clone(), Term::iri(topic.clone()), Provenance::new(ex.id.clone(), Method::Ner, 1.0));
            report.triples_added += usize::from(kg.add_triple(triple, ValidationMode::Strict)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{assign_key_topics, book_tfidf, segment_textbook, HeadingRules, ScoreMode};
    use crate::model::Ontology;
    use crate::textindex::TokenizerConfig;

    #[test]
    fn book_topics_land_in_the_graph_once() {
        let html = "<h1>U</h1><h2>L</h2><h3>Equations</h3><p>An equation has an equal sign.</p><h3>Other</h3><p>Nothing.</p>";
        let tree = segment_textbook("alg", html, &HeadingRules::default(), ValidationMode::Strict).unwrap();
        let catalog = TopicCatalog::from_json(r#"[{"conceptIri":"edukg://concept/equation","label":"equation"}]"#).unwrap();
        let tfidf = book_tfidf(&tree, TokenizerConfig::default());
        let topics = assign_key_topics(&tree, &catalog, &tfidf, 0.0, ScoreMode::FirstOccurrence);
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        let r = store_book(&mut kg, &tree, &catalog, &topics).unwrap();
        assert_eq!(r, StoreReport { entities_added: 3, triples_added: 1 });
        assert_eq!(store_book(&mut kg, &tree, &catalog, &topics).unwrap(), StoreReport::default());
    }
}
