//! Rhetorical roles: template recognition over a concept's text values,
//! materialization as role entities, and concept-mention linking.

use std::collections::BTreeSet;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::ConsolidationError;
use crate::model::{
    vocab, Datatype, Entity, EntityKind, Iri, KnowledgeGraph, Method, Provenance, RoleType, Term, Triple, ValidationMode,
};
use crate::textindex::{fnv1a64, Gazetteer};

/// One template per role type. Lower `priority` wins when several templates
/// match the same value. `cues` are the nouns that name the role in a
/// question or caption ("the effect of ...").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleTemplate {
    pub role_type: RoleType,
    pub patterns: Vec<String>,
    #[serde(default)]
    pub cues: Vec<String>,
    pub priority: u32,
}

#[derive(Debug, Clone)]
pub struct RoleRegistry {
    templates: Vec<(RoleTemplate, Vec<Regex>)>,
}

fn template(role_type: RoleType, priority: u32, patterns: &[&str], cues: &[&str]) -> RoleTemplate {
    RoleTemplate {
        role_type,
        patterns: patterns.iter().map(|s| (*s).to_owned()).collect(),
        cues: cues.iter().map(|s| (*s).to_owned()).collect(),
        priority,
    }
}

pub fn default_role_templates() -> Vec<RoleTemplate> {
    vec![
        template(
            RoleType::Definition,
            1,
            &[r"\bis defined as\b", r"\bis called\b", r"\brefers to\b", r"\bis known as\b", "定义为", "叫做", "称为", "是指"],
            &["definition", "meaning", "content", "定义", "含义", "内容"],
        ),
        template(
            RoleType::Process,
            2,
            &[r"\bstep\s*\d+", r"\bstages? of\b", r"第[一二三四五六七八九十\d]+步", "步骤"],
            &["process", "procedure", "steps", "过程", "步骤"],
        ),
        template(
            RoleType::Mechanism,
            3,
            &[r"\bworks? by\b", r"\bby means of\b", r"\bmechanism\b", "原理", "机制"],
            &["mechanism", "principle", "原理", "机制"],
        ),
        template(
            RoleType::Reason,
            4,
            &[r"\bcauses? of\b", r"\bbecause\b", r"\breasons? (for|of|why)\b", r"\bdue to\b", "原因", "因为", "由于"],
            &["cause", "causes", "reason", "reasons", "原因"],
        ),
        template(
            RoleType::Effect,
            5,
            &[r"\beffects? of\b", r"\bresult(s|ed)? in\b", r"\bconsequences? of\b", r"\bimpacts? of\b", "影响", "后果"],
            &["effect", "effects", "impact", "consequence", "consequences", "result", "影响", "后果"],
        ),
        template(
            RoleType::Significance,
            6,
            &[r"\bimportant\b", r"\bsignifican(t|ce)\b", r"\bplays? an? (key|vital|major) role\b", "意义", "重要"],
            &["significance", "importance", "意义"],
        ),
        template(
            RoleType::Condition,
            7,
            &[r"\bmust be\b", r"\bconditions?\b", r"\bonly if\b", r"\bprovided that\b", "条件", "必须"],
            &["condition", "conditions", "requirement", "条件"],
        ),
    ]
}

impl RoleRegistry {
    /// Requires exactly one template per role type, distinct priorities and
    /// at least one compilable pattern each.
    pub fn new(mut templates: Vec<RoleTemplate>) -> Result<Self, ConsolidationError> {
        let mut priorities = BTreeSet::new();
        let mut roles = BTreeSet::new();
        for t in &templates {
            if !roles.insert(t.role_type) {
                return Err(ConsolidationError::Template(format!("two templates for {}", t.role_type)));
            }
            if !priorities.insert(t.priority) {
                return Err(ConsolidationError::Template(format!("priority {} used twice", t.priority)));
            }
            if t.patterns.is_empty() {
                return Err(ConsolidationError::Template(format!("{} has no pattern", t.role_type)));
            }
        }
        if let Some(missing) = RoleType::ALL.into_iter().find(|r| !roles.contains(r)) {
            return Err(ConsolidationError::Template(format!("no template for {missing}")));
        }
        templates.sort_by_key(|t| t.priority);
        let templates = templates
            .into_iter()
            .map(|t| {
                let compiled = t
                    .patterns
                    .iter()
                    .map(|p| {
                        RegexBuilder::new(p)
                            .case_insensitive(true)
                            .build()
                            .map_err(|e| ConsolidationError::Template(format!("{}: {e}", t.role_type)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((t, compiled))
            })
            .collect::<Result<Vec<_>, ConsolidationError>>()?;
        Ok(RoleRegistry { templates })
    }

    pub fn from_json(json: &str) -> Result<Self, ConsolidationError> {
        let templates: Vec<RoleTemplate> = serde_json::from_str(json).map_err(|e| ConsolidationError::Json(e.to_string()))?;
        Self::new(templates)
    }

    pub fn templates(&self) -> impl Iterator<Item = &RoleTemplate> {
        self.templates.iter().map(|(t, _)| t)
    }

    /// The highest-priority role whose template matches `text`.
    pub fn classify(&self, text: &str) -> Option<RoleType> {
        self.templates.iter().find(|(_, res)| res.iter().any(|re| re.is_match(text))).map(|(t, _)| t.role_type)
    }

    /// (cue, role) pairs, longest cue first.
    pub fn cues(&self) -> Vec<(&str, RoleType)> {
        let mut cues: Vec<(&str, RoleType)> =
            self.templates().flat_map(|t| t.cues.iter().map(move |c| (c.as_str(), t.role_type))).collect();
        cues.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then(a.0.cmp(b.0)));
        cues
    }
}

impl Default for RoleRegistry {
    fn default() -> Self {
        RoleRegistry::new(default_role_templates()).expect("default templates are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleDraft {
    pub parent: Iri,
    pub role_type: RoleType,
    pub content: String,
}

/// Text values of a concept that may hold a role: its description and every
/// text literal it carries, except the label and role bookkeeping.
pub fn role_source_values(kg: &KnowledgeGraph, concept: &Iri) -> Vec<String> {
    let skip = [vocab::LABEL, vocab::ROLE_TYPE, vocab::CONTENT, vocab::RAW_ASSERTION];
    let mut values = Vec::new();
    if let Some(e) = kg.entity(concept) {
        if !e.description.trim().is_empty() {
            values.push(e.description.clone());
        }
    }
    for t in kg.with_subject(concept) {
        if skip.contains(&t.predicate.as_str()) {
            continue;
        }
        if let Some(lit) = t.object.as_literal() {
            if lit.datatype == Datatype::Text && !values.contains(&lit.lexical) {
                values.push(lit.lexical.clone());
            }
        }
    }
    values
}

pub fn recognize_roles(concept: &Iri, values: &[String], registry: &RoleRegistry) -> Vec<RoleDraft> {
    values
        .iter()
        .filter_map(|v| {
            registry.classify(v).map(|role_type| RoleDraft { parent: concept.clone(), role_type, content: v.clone() })
        })
        .collect()
}

/// Role iris depend only on parent, role and content, so materializing the
/// same draft twice is a no-op.
pub fn role_iri(draft: &RoleDraft) -> Iri {
    let parent = draft.parent.as_str().rsplit('/').next().unwrap_or("");
    Iri::local("role", &format!("{parent} {} {:08x}", draft.role_type, fnv1a64(draft.content.as_bytes()) as u32))
}

/// Adds the role entity with its `parentConcept`, `roleType` and `content`
/// triples. Returns the role iri and the number of new triples.
pub fn materialize_role(
    kg: &mut KnowledgeGraph,
    draft: &RoleDraft,
    source: &str,
) -> Result<(Iri, usize), ConsolidationError> {
    let parent_label = kg
        .entity(&draft.parent)
        .map(|e| e.label.clone())
        .ok_or_else(|| ConsolidationError::UnknownEntity(draft.parent.clone()))?;
    let iri = role_iri(draft);
    let entity = Entity {
        kind: EntityKind::RhetoricalRole { role: draft.role_type },
        ..Entity::concept(iri.clone(), format!("{} of {parent_label}", draft.role_type), vocab::iri(vocab::RHETORICAL_ROLE))
    };
    kg.add_entity(entity, ValidationMode::Strict)?;
    let provenance = Provenance::new(source, Method::Expansion, 1.0);
    let mut added = 0;
    for (p, o) in [
        (vocab::PARENT_CONCEPT, Term::iri(draft.parent.clone())),
        (vocab::ROLE_TYPE, Term::text(draft.role_type.as_str())),
        (vocab::CONTENT, Term::text(draft.content.clone())),
    ] {
        if kg.add_triple(Triple::new(iri.clone(), vocab::iri(p), o, provenance.clone()), ValidationMode::Strict)? {
            added += 1;
        }
    }
    Ok((iri, added))
}

/// Gazetteer over the labels and aliases of every concept in the graph.
pub fn concept_gazetteer(kg: &KnowledgeGraph) -> Gazetteer<Iri> {
    let mut g = Gazetteer::new();
    for e in kg.entities().filter(|e| e.kind == EntityKind::Concept) {
        g.insert(&e.label, e.iri.clone());
        for a in &e.aliases {
            g.insert(a, e.iri.clone());
        }
    }
    g
}

/// `mentionsConcept` triples from the role to every concept named in its
/// content, the parent excluded.
pub fn link_roles(kg: &KnowledgeGraph, role: &Iri, gazetteer: &Gazetteer<Iri>) -> Vec<Triple> {
    let content = vocab::iri(vocab::CONTENT);
    let parent = kg.objects(role, &vocab::iri(vocab::PARENT_CONCEPT)).first().and_then(|t| t.as_iri()).cloned();
    let mut targets = BTreeSet::new();
    for text in kg.objects(role, &content) {
        for m in gazetteer.find_all(text.lexical()) {
            targets.extend(m.payloads.iter().filter(|c| Some(*c) != parent.as_ref() && *c != role).cloned());
        }
    }
    targets
        .into_iter()
        .map(|c| {
            Triple::new(
                role.clone(),
                vocab::iri(vocab::MENTIONS_CONCEPT),
                Term::iri(c),
                Provenance::new(format!("role:{role}"), Method::El, 1.0),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleReport {
    pub roles: Vec<Iri>,
    pub triples_added: usize,
}

/// Recognizes, materializes and links roles for every concept in the graph.
pub fn consolidate_roles(kg: &mut KnowledgeGraph, registry: &RoleRegistry) -> Result<RoleReport, ConsolidationError> {
    let concepts: Vec<Iri> = kg.entities().filter(|e| e.kind == EntityKind::Concept).map(|e| e.iri.clone()).collect();
    let mut report = RoleReport::default();
    for c in &concepts {
        let drafts = recognize_roles(c, &role_source_values(kg, c), registry);
        for d in drafts {
            let (iri, added) = materialize_role(kg, &d, &format!("roles:{c}"))?;
            report.triples_added += added;
            report.roles.push(iri);
        }
    }
    let gazetteer = concept_gazetteer(kg);
    for r in &report.roles {
        for t in link_roles(kg, r, &gazetteer) {
            if kg.add_triple(t, ValidationMode::Strict)? {
                report.triples_added += 1;
            }
        }
    }
    report.roles.dedup();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ontology;

    #[test]
    fn role_sentences_classify() {
        let reg = RoleRegistry::default();
        let cases = [
            ("A prime is defined as a number with exactly two divisors.", RoleType::Definition),
            ("Step 2. Record every measurement in the table.", RoleType::Process),
            ("A lever works by trading distance for force.", RoleType::Mechanism),
            ("Drought was one of the cause of the famine.", RoleType::Reason),
            ("Lower prices were one of the effect of mass production.", RoleType::Effect),
            ("Ozone is an important shield against ultraviolet light.", RoleType::Significance),
            ("The base of a logarithm must be positive.", RoleType::Condition),
            ("匀速直线运动是指速度不变的运动。", RoleType::Definition),
        ];
        for (text, want) in cases {
            assert_eq!(reg.classify(text), Some(want), "{text}");
        }
        assert_eq!(reg.classify("Paris is a city."), None);
    }

    #[test]
    fn registry_rejects_bad_sets() {
        let mut t = default_role_templates();
        t[1].priority = 1;
        assert!(RoleRegistry::new(t).is_err());
        let mut t = default_role_templates();
        t.pop();
        assert!(RoleRegistry::new(t).is_err());
        let mut t = default_role_templates();
        t[0].patterns = vec!["(".into()];
        assert!(RoleRegistry::new(t).is_err());
    }

    fn graph() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        let class = vocab::iri(vocab::CONCEPT);
        kg.add_entity(
            Entity::concept(Iri::local("concept", "equation"), "Equation", class.clone())
                .with_description("Equation is defined as a mathematical statement with an equal symbol."),
            ValidationMode::Strict,
        )
        .unwrap();
        kg.add_entity(Entity::concept(Iri::local("concept", "symbol"), "equal symbol", class), ValidationMode::Strict)
            .unwrap();
        kg
    }

    #[test]
    fn consolidation_materializes_and_links() {
        let mut kg = graph();
        let report = consolidate_roles(&mut kg, &RoleRegistry::default()).unwrap();
        assert_eq!(report.roles.len(), 1);
        let role = &report.roles[0];
        assert_eq!(kg.entity(role).unwrap().role_type(), Some(RoleType::Definition));
        assert_eq!(kg.objects(role, &vocab::iri(vocab::ROLE_TYPE)), vec![&Term::text("Definition")]);
        let mentions = kg.objects(role, &vocab::iri(vocab::MENTIONS_CONCEPT));
        assert_eq!(mentions, vec![&Term::iri(Iri::local("concept", "symbol"))]);
        let before = kg.clone();
        let again = consolidate_roles(&mut kg, &RoleRegistry::default()).unwrap();
        assert_eq!(again.triples_added, 0);
        assert_eq!(kg.triple_count(), before.triple_count());
    }

    #[test]
    fn materializing_needs_a_known_parent() {
        let mut kg = graph();
        let draft = RoleDraft { parent: Iri::local("concept", "nope"), role_type: RoleType::Effect, content: "x".into() };
        assert!(matches!(materialize_role(&mut kg, &draft, "t"), Err(ConsolidationError::UnknownEntity(_))));
    }
}
