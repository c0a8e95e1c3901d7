//! Mention detection, candidate generation, disambiguation and storage.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::record::{build_context, HeteroRecord};
use super::EduLinkError;
use crate::consolidation::RoleRegistry;
use crate::model::{vocab, Entity, EntityKind, Iri, KnowledgeGraph, Method, Provenance, RoleType, Term, Triple, ValidationMode};
use crate::textindex::{char_slice, EmbeddingProvider, Gazetteer, InvertedIndex, SearchHit};

pub const DEFAULT_TAU_NIL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum MentionKind {
    Concept,
    #[serde(rename_all = "camelCase")]
    Role { role_type: RoleType },
}

/// A detected span in a record's mention text. `query` is the string sent to
/// the index: the surface for concepts, "{Role} of {concept}" for roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub query: String,
    #[serde(flatten)]
    pub kind: MentionKind,
    pub source_record_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iri: Iri,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkResult {
    pub mention: Mention,
    /// `None` is NIL.
    pub resolved: Option<Iri>,
    pub score: f64,
    pub candidate_trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LinkConfig {
    pub k: usize,
    pub max_edit: usize,
    pub tau_nil: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { k: 10, max_edit: 1, tau_nil: DEFAULT_TAU_NIL }
    }
}

/// Gazetteer over the labels and aliases of the non-role entities of an
/// index.
pub fn mention_gazetteer(index: &InvertedIndex) -> Gazetteer<Iri> {
    let mut g = Gazetteer::new();
    for e in index.entities().iter().filter(|e| e.role.is_none()) {
        g.insert(&e.label, e.iri.clone());
        for a in &e.aliases {
            g.insert(a, e.iri.clone());
        }
    }
    g
}

/// Cue matchers built once per registry: "<cue> of (the)? ⟨concept⟩" and the
/// head-final form "⟨concept⟩的?<cue>".
pub struct RoleCues {
    before: Option<Regex>,
    after: Option<Regex>,
    by_cue: BTreeMap<String, RoleType>,
}

impl RoleCues {
    pub fn new(registry: &RoleRegistry) -> Self {
        let cues = registry.cues();
        let by_cue: BTreeMap<String, RoleType> = cues.iter().map(|(c, r)| (c.to_lowercase(), *r)).collect();
        let alternation = |pick: &dyn Fn(&str) -> bool| {
            let alts: Vec<String> = cues.iter().filter(|(c, _)| pick(c)).map(|(c, _)| regex::escape(c)).collect();
            (!alts.is_empty()).then(|| alts.join("|"))
        };
        let ascii = |c: &str| c.is_ascii();
        let before = alternation(&ascii)
            .map(|a| Regex::new(&format!(r"(?i)(?:^|[^\p{{L}}\p{{N}}])({a})\s+of\s+(?:the\s+)?$")).expect("escaped cues"));
        let after = alternation(&|c: &str| !c.is_ascii())
            .map(|a| Regex::new(&format!(r"^\s*的?\s*({a})")).expect("escaped cues"));
        RoleCues { before, after, by_cue }
    }

    fn role(&self, cue: &str) -> Option<RoleType> {
        self.by_cue.get(&cue.to_lowercase()).copied()
    }
}

fn byte_to_char(s: &str, byte: usize) -> usize {
    s[..byte].chars().count()
}

/// Concept mentions from the gazetteer plus role mentions built around
/// them. Overlaps are resolved in favour of role mentions, then longer
/// spans, then earlier ones. The result is sorted by start.
pub fn detect_mentions(text: &str, record_id: &str, gazetteer: &Gazetteer<Iri>, cues: &RoleCues) -> Vec<Mention> {
    let chars: Vec<char> = text.chars().collect();
    let mut found = Vec::new();
    for m in gazetteer.find_all(text) {
        let concept: String = chars[m.start..m.end].iter().collect();
        found.push(Mention {
            start: m.start,
            end: m.end,
            surface: concept.clone(),
            query: concept.clone(),
            kind: MentionKind::Concept,
            source_record_id: record_id.to_owned(),
        });
        let prefix: String = chars[..m.start].iter().collect();
        let suffix: String = chars[m.end..].iter().collect();
        let before = cues.before.as_ref().and_then(|re| re.captures(&prefix)).and_then(|c| {
            let g = c.get(1)?;
            Some((byte_to_char(&prefix, g.start()), m.end, cues.role(g.as_str())?))
        });
        let after = cues.after.as_ref().and_then(|re| re.captures(&suffix)).and_then(|c| {
            let g = c.get(1)?;
            Some((m.start, m.end + byte_to_char(&suffix, g.end()), cues.role(g.as_str())?))
        });
        for (start, end, role_type) in before.into_iter().chain(after) {
            found.push(Mention {
                start,
                end,
                surface: char_slice(text, start, end),
                query: format!("{role_type} of {concept}"),
                kind: MentionKind::Role { role_type },
                source_record_id: record_id.to_owned(),
            });
        }
    }
    found.sort_by(|a, b| {
        let is_role = |m: &Mention| matches!(m.kind, MentionKind::Role { .. });
        is_role(b).cmp(&is_role(a)).then((b.end - b.start).cmp(&(a.end - a.start))).then(a.start.cmp(&b.start))
    });
    let mut kept: Vec<Mention> = Vec::new();
    for m in found {
        if kept.iter().all(|k| m.end <= k.start || k.end <= m.start) {
            kept.push(m);
        }
    }
    kept.sort_by_key(|m| m.start);
    kept
}

/// Index lookup for a mention. A role mention keeps only role entities of
/// its type and falls back to its concept when none exists.
pub fn gen_candidates(
    index: &InvertedIndex,
    mention: &Mention,
    k: usize,
    max_edit: usize,
) -> Result<Vec<SearchHit>, EduLinkError> {
    if let MentionKind::Role { role_type } = mention.kind {
        let hits: Vec<SearchHit> = index
            .search(&mention.query, index.len().max(1), max_edit)?
            .into_iter()
            .filter(|h| index.entity(&h.iri).is_some_and(|e| e.role == Some(role_type)))
            .take(k)
            .collect();
        if !hits.is_empty() {
            return Ok(hits);
        }
        let concept = char_slice(&mention.query, role_type.as_str().len() + 4, mention.query.chars().count());
        return Ok(index.search(&concept, k, max_edit)?);
    }
    Ok(index.search(&mention.query, k, max_edit)?)
}

/// Text a candidate is compared by: its description, or its label when the
/// description is empty.
pub fn candidate_text(index: &InvertedIndex, iri: &Iri) -> String {
    match index.entity(iri) {
        Some(e) if !e.description.trim().is_empty() => e.description.clone(),
        Some(e) => e.label.clone(),
        None => String::new(),
    }
}

/// Ranks `candidates` by cosine between the context and each candidate's
/// text, ties by iri, and resolves to the top one when it reaches τ_nil.
pub fn disambiguate(
    mention: &Mention,
    context: &str,
    candidates: &[(Iri, String)],
    provider: &dyn EmbeddingProvider,
    tau_nil: f64,
) -> Result<LinkResult, EduLinkError> {
    if candidates.is_empty() {
        return Ok(LinkResult { mention: mention.clone(), resolved: None, score: 0.0, candidate_trace: Vec::new() });
    }
    let ctx = provider.embed(context)?;
    let texts: Vec<&str> = candidates.iter().map(|(_, t)| t.as_str()).collect();
    let vectors = provider.embed_batch(&texts)?;
    let mut trace = Vec::with_capacity(candidates.len());
    for ((iri, _), v) in candidates.iter().zip(&vectors) {
        trace.push(TraceEntry { iri: iri.clone(), score: ctx.cosine(v)? });
    }
    trace.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.iri.cmp(&b.iri)));
    trace.dedup_by(|a, b| a.iri == b.iri);
    let top = &trace[0];
    let resolved = (top.score >= tau_nil).then(|| top.iri.clone());
    Ok(LinkResult { mention: mention.clone(), resolved, score: top.score, candidate_trace: trace })
}

/// Shared read-only linking state.
pub struct Linker<'a> {
    pub index: &'a InvertedIndex,
    pub provider: &'a dyn EmbeddingProvider,
    pub gazetteer: Gazetteer<Iri>,
    pub cues: RoleCues,
    pub config: LinkConfig,
}

impl<'a> Linker<'a> {
    pub fn new(
        index: &'a InvertedIndex,
        provider: &'a dyn EmbeddingProvider,
        registry: &RoleRegistry,
        config: LinkConfig,
    ) -> Self {
        Linker { index, provider, gazetteer: mention_gazetteer(index), cues: RoleCues::new(registry), config }
    }

    pub fn link_record(&self, record: &HeteroRecord) -> Result<Vec<LinkResult>, EduLinkError> {
        record.validate()?;
        let mentions = detect_mentions(record.mention_text(), record.id(), &self.gazetteer, &self.cues);
        let mut out = Vec::with_capacity(mentions.len());
        for m in &mentions {
            let hits = gen_candidates(self.index, m, self.config.k, self.config.max_edit)?;
            let candidates: Vec<(Iri, String)> =
                hits.into_iter().map(|h| (h.iri.clone(), candidate_text(self.index, &h.iri))).collect();
            let context = build_context(record, m);
            out.push(disambiguate(m, &context, &candidates, self.provider, self.config.tau_nil)?);
        }
        Ok(out)
    }
}

pub fn datum_iri(record: &HeteroRecord) -> Iri {
    Iri::local("datum", record.id())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexReport {
    pub datum: Iri,
    pub links: Vec<LinkResult>,
    pub triples_added: usize,
}

/// Stores the record as an ExternalDatum entity and adds one `indexedBy`
/// triple per resolved link. Storing the same record twice adds nothing.
pub fn store_links(kg: &mut KnowledgeGraph, record: &HeteroRecord, links: &[LinkResult]) -> Result<usize, EduLinkError> {
    let datum = datum_iri(record);
    let mut entity = Entity::concept(datum.clone(), record.display_label(), vocab::iri(vocab::EXTERNAL_DATUM))
        .with_description(record.full_text());
    entity.kind = EntityKind::ExternalDatum { format: record.kind_name().to_owned() };
    kg.add_entity(entity, ValidationMode::Strict)?;
    let mut added = 0;
    for link in links {
        let Some(topic) = &link.resolved else { continue };
        let t = Triple::new(
            datum.clone(),
            vocab::iri(vocab::INDEXED_BY),
            Term::iri(topic.clone()),
            Provenance::new(record.id(), Method::El, link.score.clamp(0.0, 1.0)),
        );
        added += usize::from(kg.add_triple(t, ValidationMode::Strict)?);
    }
    Ok(added)
}

pub fn index_record(kg: &mut KnowledgeGraph, record: &HeteroRecord, linker: &Linker<'_>) -> Result<IndexReport, EduLinkError> {
    let links = linker.link_record(record)?;
    let triples_added = store_links(kg, record, &links)?;
    Ok(IndexReport { datum: datum_iri(record), links, triples_added })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ontology;
    use crate::textindex::{IndexedEntity, TableProvider, TokenizerConfig};

    fn ent(iri: &str, label: &str, description: &str, role: Option<RoleType>) -> IndexedEntity {
        IndexedEntity {
            iri: Iri::new(iri).unwrap(),
            label: label.into(),
            aliases: Vec::new(),
            description: description.into(),
            role,
        }
    }

    fn index() -> InvertedIndex {
        InvertedIndex::build(
            [
                ent("edukg://concept/industrial_revolution", "Industrial Revolution", "An era of industry.", None),
                ent("edukg://role/ir_effect", "Effect of Industrial Revolution", "Wealth grew.", Some(RoleType::Effect)),
                ent("edukg://concept/capacitance_q", "capacitance", "physical quantity of stored charge", None),
                ent("edukg://concept/capacitance_c", "capacitance", "electronic component in circuits", None),
            ],
            TokenizerConfig::default(),
        )
    }

    #[test]
    fn role_mention_wins_over_concept() {
        let idx = index();
        let cues = RoleCues::new(&RoleRegistry::default());
        let m = detect_mentions("The effect of the Industrial Revolution was large.", "r", &mention_gazetteer(&idx), &cues);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, MentionKind::Role { role_type: RoleType::Effect });
        assert_eq!(m[0].surface, "effect of the Industrial Revolution");
        assert_eq!(m[0].query, "Effect of Industrial Revolution");
        let hits = gen_candidates(&idx, &m[0], 5, 1).unwrap();
        assert_eq!(hits[0].iri.as_str(), "edukg://role/ir_effect");
        assert!(detect_mentions("", "r", &mention_gazetteer(&idx), &cues).is_empty());
    }

    #[test]
    fn disambiguation_picks_closest_description() {
        let idx = index();
        let mut p = TableProvider::new("t", 2);
        p.insert("physical quantity of stored charge", vec![1.0, 0.0]).unwrap();
        p.insert("electronic component in circuits", vec![0.0, 1.0]).unwrap();
        p.insert("The capacitance of a plate pair is a physical quantity.", vec![0.9, 0.1]).unwrap();
        let linker = Linker::new(&idx, &p, &RoleRegistry::default(), LinkConfig::default());
        let rec = HeteroRecord::Unstructured {
            id: "r".into(),
            text: "The capacitance of a plate pair is a physical quantity.".into(),
            caption: None,
        };
        let links = linker.link_record(&rec).unwrap();
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].resolved.as_ref().unwrap().as_str(), "edukg://concept/capacitance_q");
        assert_eq!(links[0].candidate_trace.len(), 2);
        assert_eq!(links[0].score, links[0].candidate_trace[0].score);
    }

    #[test]
    fn nil_below_threshold_and_on_empty() {
        let mut p = TableProvider::new("t", 2);
        p.insert("ctx", vec![1.0, 0.0]).unwrap();
        p.insert("far", vec![0.0, 1.0]).unwrap();
        let m = Mention {
            start: 0,
            end: 1,
            surface: "x".into(),
            query: "x".into(),
            kind: MentionKind::Concept,
            source_record_id: "r".into(),
        };
        let r = disambiguate(&m, "ctx", &[(Iri::new("edukg://concept/a").unwrap(), "far".into())], &p, 0.2).unwrap();
        assert_eq!(r.resolved, None);
        assert_eq!(r.candidate_trace.len(), 1);
        let r = disambiguate(&m, "ctx", &[], &p, 0.2).unwrap();
        assert!(r.resolved.is_none() && r.candidate_trace.is_empty());
    }

    #[test]
    fn storing_is_idempotent() {
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        kg.add_entity(
            Entity::concept(Iri::local("concept", "industrial revolution"), "Industrial Revolution", vocab::iri(vocab::CONCEPT)),
            ValidationMode::Strict,
        )
        .unwrap();
        let idx = InvertedIndex::from_graph(&kg, TokenizerConfig::default());
        let p = crate::textindex::HashedTrigramProvider::new(64);
        let linker = Linker::new(&idx, &p, &RoleRegistry::default(), LinkConfig { tau_nil: 0.0, ..LinkConfig::default() });
        let rec = HeteroRecord::Unstructured { id: "news-1".into(), text: "The Industrial Revolution began.".into(), caption: None };
        let first = index_record(&mut kg, &rec, &linker).unwrap();
        assert_eq!(first.triples_added, 1);
        let n = kg.triple_count();
        let again = index_record(&mut kg, &rec, &linker).unwrap();
        assert_eq!(again.triples_added, 0);
        assert_eq!(kg.triple_count(), n);
        let none = HeteroRecord::Unstructured { id: "news-2".into(), text: "Nothing here.".into(), caption: None };
        assert_eq!(index_record(&mut kg, &none, &linker).unwrap().triples_added, 0);
        assert!(kg.entity(&datum_iri(&none)).is_some());
    }
}
