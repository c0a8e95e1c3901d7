//! Keyword templates that turn a question into a query plan, and the answer
//! path over the graph.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::sparql::{execute, parse_query, PatternTerm, SelectQuery, TriplePattern};
use super::QaError;
use crate::consolidation::RoleRegistry;
use crate::edulink::{candidate_text, disambiguate, Linker, Mention, MentionKind};
use crate::model::{vocab, Iri, KnowledgeGraph, Ontology, PropertyKind, RoleType};
use crate::textindex::{char_slice, is_cjk, normalize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum QaTarget {
    DatatypeProperty { iri: Iri },
    RoleRoute { role: RoleType },
}

/// The first trigger phrase found in a question selects the template; lower
/// `priority` is tried first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub id: String,
    pub triggers: Vec<String>,
    pub target: QaTarget,
    pub priority: u32,
}

/// Role routes start here so that property templates from data files, which
/// usually use small priorities, are tried first.
pub const ROLE_ROUTE_PRIORITY: u32 = 1000;

/// One route per role type, triggered by that role's cue words.
pub fn role_route_templates(registry: &RoleRegistry) -> Vec<QuestionTemplate> {
    registry
        .templates()
        .filter(|t| !t.cues.is_empty())
        .map(|t| QuestionTemplate {
            id: format!("role-{}", t.role_type.as_str().to_lowercase()),
            triggers: t.cues.clone(),
            target: QaTarget::RoleRoute { role: t.role_type },
            priority: ROLE_ROUTE_PRIORITY + t.priority,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<QuestionTemplate>,
}

impl TemplateSet {
    /// Checks triggers, unique ids and that property targets are datatype
    /// properties of `ontology`.
    pub fn new(mut templates: Vec<QuestionTemplate>, ontology: &Ontology) -> Result<Self, QaError> {
        let mut ids = BTreeSet::new();
        for t in &templates {
            if !ids.insert(t.id.as_str()) {
                return Err(QaError::Template(format!("duplicate template id {}", t.id)));
            }
            if t.triggers.is_empty() || t.triggers.iter().any(|s| s.trim().is_empty()) {
                return Err(QaError::Template(format!("{}: empty trigger", t.id)));
            }
            if let QaTarget::DatatypeProperty { iri } = &t.target {
                match ontology.property(iri) {
                    Some(p) if p.kind == PropertyKind::Datatype => {}
                    _ => return Err(QaError::Template(format!("{}: {iri} is not a datatype property", t.id))),
                }
            }
        }
        templates.sort_by(|a, b| a.priority.cmp(&b.priority).then_with(|| a.id.cmp(&b.id)));
        Ok(TemplateSet { templates })
    }

    /// Templates from JSON plus the role routes of `registry`.
    pub fn from_json(json: &str, ontology: &Ontology, registry: &RoleRegistry) -> Result<Self, QaError> {
        let mut templates: Vec<QuestionTemplate> = serde_json::from_str(json).map_err(|e| QaError::Template(e.to_string()))?;
        templates.extend(role_route_templates(registry));
        Self::new(templates, ontology)
    }

    pub fn with_role_routes(ontology: &Ontology, registry: &RoleRegistry) -> Self {
        Self::new(role_route_templates(registry), ontology).expect("role routes are valid")
    }

    pub fn templates(&self) -> &[QuestionTemplate] {
        &self.templates
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() && !is_cjk(c)
}

/// Char range of `phrase` in `text`, both normalized, not splitting words.
fn find_phrase(text: &[char], phrase: &[char]) -> Option<(usize, usize)> {
    if phrase.is_empty() || phrase.len() > text.len() {
        return None;
    }
    (0..=text.len() - phrase.len()).find_map(|i| {
        let end = i + phrase.len();
        let left = i == 0 || !(is_word(text[i - 1]) && is_word(text[i]));
        let right = end == text.len() || !(is_word(text[end - 1]) && is_word(text[end]));
        (text[i..end] == *phrase && left && right).then_some((i, end))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TemplateMatch {
    pub template_id: String,
    pub trigger: String,
    pub entity: Iri,
    pub target: QaTarget,
}

const STOPWORDS: &[&str] = &[
    "what", "which", "who", "whom", "when", "where", "why", "how", "is", "are", "was", "were", "the", "a", "an", "of",
    "do", "does", "did", "in", "on", "for", "to", "about", "tell", "me", "please", "s",
];

/// Resolves the entity named in `text`: the longest gazetteer match over
/// non-role entities (disambiguated against the whole text when the surface
/// is shared), otherwise the best fuzzy hit on the text minus question words.
fn resolve_entity(text: &str, linker: &Linker<'_>) -> Result<Option<Iri>, QaError> {
    let matches = linker.gazetteer.find_all(text);
    let best = matches.iter().max_by(|a, b| (a.end - a.start).cmp(&(b.end - b.start)).then(b.start.cmp(&a.start)));
    if let Some(m) = best {
        if m.payloads.len() == 1 {
            return Ok(Some(m.payloads[0].clone()));
        }
        let mention = Mention {
            start: m.start,
            end: m.end,
            surface: char_slice(text, m.start, m.end),
            query: char_slice(text, m.start, m.end),
            kind: MentionKind::Concept,
            source_record_id: "question".into(),
        };
        let candidates: Vec<(Iri, String)> =
            m.payloads.iter().map(|iri| (iri.clone(), candidate_text(linker.index, iri))).collect();
        let link = disambiguate(&mention, text, &candidates, linker.provider, f64::NEG_INFINITY)?;
        return Ok(link.resolved);
    }
    let normalized = normalize(text, true);
    let words: Vec<&str> = normalized
        .split(|c: char| !is_word(c) && !is_cjk(c))
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
        .collect();
    if words.is_empty() {
        return Ok(None);
    }
    let hits = linker.index.search(&words.join(" "), linker.index.len().max(1), linker.config.max_edit)?;
    Ok(hits.into_iter().find(|h| linker.index.entity(&h.iri).is_some_and(|e| e.role.is_none())).map(|h| h.iri))
}

/// The first template (by priority) with a trigger in the question, and the
/// entity named by the rest of the question.
pub fn match_template(question: &str, templates: &TemplateSet, linker: &Linker<'_>) -> Result<TemplateMatch, QaError> {
    let q: Vec<char> = normalize(question, true).chars().collect();
    for t in templates.templates() {
        for trigger in &t.triggers {
            let phrase: Vec<char> = normalize(trigger.trim(), true).chars().collect();
            let Some((start, end)) = find_phrase(&q, &phrase) else { continue };
            let rest: String = q[..start].iter().chain([' '].iter()).chain(q[end..].iter()).collect();
            return match resolve_entity(&rest, linker)? {
                Some(entity) => Ok(TemplateMatch {
                    template_id: t.id.clone(),
                    trigger: trigger.clone(),
                    entity,
                    target: t.target.clone(),
                }),
                None => Err(QaError::EntityUnresolved(question.to_owned())),
            };
        }
    }
    Err(QaError::NoTemplate(question.to_owned()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum QueryPlan {
    PropertyLookup { entity: Iri, predicate: Iri, query: String },
    RoleLookup { entity: Iri, role: RoleType, query: String },
}

impl QueryPlan {
    pub fn query(&self) -> &str {
        match self {
            QueryPlan::PropertyLookup { query, .. } | QueryPlan::RoleLookup { query, .. } => query,
        }
    }

    /// Recovers a plan from query text of one of the two rendered shapes.
    pub fn from_query_text(text: &str) -> Result<QueryPlan, QaError> {
        let q = parse_query(text)?;
        plan_shape(&q).ok_or_else(|| QaError::UnsupportedQuery(text.to_owned()))
    }
}

fn var(name: &str) -> PatternTerm {
    PatternTerm::Var(name.to_owned())
}

fn pattern(subject: PatternTerm, predicate: &'static str, object: PatternTerm) -> TriplePattern {
    TriplePattern { subject, predicate: PatternTerm::Iri(vocab::iri(predicate)), object }
}

pub fn build_query(entity: &Iri, target: &QaTarget) -> SelectQuery {
    match target {
        QaTarget::DatatypeProperty { iri } => SelectQuery {
            vars: vec!["v".into()],
            patterns: vec![TriplePattern {
                subject: PatternTerm::Iri(entity.clone()),
                predicate: PatternTerm::Iri(iri.clone()),
                object: var("v"),
            }],
            limit: None,
        },
        QaTarget::RoleRoute { role } => SelectQuery {
            vars: vec!["r".into(), "content".into()],
            patterns: vec![
                pattern(var("r"), vocab::PARENT_CONCEPT, PatternTerm::Iri(entity.clone())),
                pattern(var("r"), vocab::ROLE_TYPE, PatternTerm::Literal(role.as_str().to_owned())),
                pattern(var("r"), vocab::CONTENT, var("content")),
            ],
            limit: None,
        },
    }
}

pub fn to_query(entity: &Iri, target: &QaTarget) -> QueryPlan {
    let query = build_query(entity, target).to_string();
    match target {
        QaTarget::DatatypeProperty { iri } => QueryPlan::PropertyLookup { entity: entity.clone(), predicate: iri.clone(), query },
        QaTarget::RoleRoute { role } => QueryPlan::RoleLookup { entity: entity.clone(), role: *role, query },
    }
}

fn plan_shape(q: &SelectQuery) -> Option<QueryPlan> {
    let (entity, target) = match q.patterns.as_slice() {
        [TriplePattern { subject: PatternTerm::Iri(e), predicate: PatternTerm::Iri(p), object: PatternTerm::Var(_) }] => {
            (e.clone(), QaTarget::DatatypeProperty { iri: p.clone() })
        }
        [TriplePattern { object: PatternTerm::Iri(e), .. }, TriplePattern { object: PatternTerm::Literal(role), .. }, _] => {
            (e.clone(), QaTarget::RoleRoute { role: role.parse().ok()? })
        }
        _ => return None,
    };
    let plan = to_query(&entity, &target);
    (parse_query(plan.query()).ok()? == *q).then_some(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    pub answers: Vec<String>,
    pub plan: QueryPlan,
    pub template_id: String,
}

/// Runs a plan. Property lookups return the object values, role lookups
/// the role contents, each sorted lexicographically.
pub fn execute_plan(kg: &KnowledgeGraph, plan: &QueryPlan) -> Result<Vec<String>, QaError> {
    let q = parse_query(plan.query())?;
    let column = q.vars.len() - 1;
    let mut out: Vec<String> = execute(kg, &q)?.into_iter().map(|row| row[column].lexical().to_owned()).collect();
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn answer(kg: &KnowledgeGraph, question: &str, templates: &TemplateSet, linker: &Linker<'_>) -> Result<Answer, QaError> {
    let m = match_template(question, templates, linker)?;
    let plan = to_query(&m.entity, &m.target);
    let answers = execute_plan(kg, &plan)?;
    Ok(Answer { answers, plan, template_id: m.template_id })
}
