use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::iri::Iri;
use super::ontology::{Ontology, PropertyKind};
use super::term::{Entity, Provenance, Term, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    #[default]
    Strict,
    Lax,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown predicate {0}")]
    UnknownPredicate(Iri),
    #[error("unknown subject {0}")]
    UnknownSubject(Iri),
    #[error("unknown object {0}")]
    UnknownObject(Iri),
    #[error("object of {predicate} does not match the property kind")]
    ObjectKindMismatch { predicate: Iri },
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("unknown class {class} for entity {entity}")]
    UnknownClass { entity: Iri, class: Iri },
    #[error("entity {0} already exists with different content")]
    EntityConflict(Iri),
}

/// A problem tolerated in lax mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationWarning {
    pub message: String,
}

/// A deduplicated triple. The first writer's provenance is primary; differing
/// provenance from later writers lands in `audit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTriple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
    pub provenance: Provenance,
    #[serde(default)]
    pub audit: Vec<Provenance>,
}

type TripleKey = (Iri, Iri, Term);

/// Ontology-typed entity and triple store with subject/predicate/object
/// indexes.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    ontology: Ontology,
    entities: BTreeMap<Iri, Entity>,
    triples: Vec<StoredTriple>,
    by_key: HashMap<TripleKey, usize>,
    by_subject: HashMap<Iri, Vec<usize>>,
    by_predicate: HashMap<Iri, Vec<usize>>,
    by_object: HashMap<Term, Vec<usize>>,
    warnings: Vec<ValidationWarning>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.ontology == other.ontology && self.entities == other.entities && self.triples == other.triples
    }
}

impl KnowledgeGraph {
    /// A graph over `ontology` extended with the built-in vocabulary.
    pub fn new(ontology: Ontology) -> Self {
        Self::with_exact_ontology(ontology.with_builtins())
    }

    pub(crate) fn with_exact_ontology(ontology: Ontology) -> Self {
        KnowledgeGraph { ontology, ..Default::default() }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn entity(&self, iri: &Iri) -> Option<&Entity> {
        self.entities.get(iri)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triples(&self) -> &[StoredTriple] {
        &self.triples
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn warnings(&self) -> &[ValidationWarning] {
        &self.warnings
    }

    /// Adds an entity. Re-adding an identical entity returns `Ok(false)`.
    pub fn add_entity(&mut self, entity: Entity, mode: ValidationMode) -> Result<bool, GraphError> {
        if let Some(existing) = self.entities.get(&entity.iri) {
            return if existing == &entity {
                Ok(false)
            } else {
                Err(GraphError::EntityConflict(entity.iri))
            };
        }
        if self.ontology.class(&entity.class_iri).is_none() {
            let err = GraphError::UnknownClass { entity: entity.iri.clone(), class: entity.class_iri.clone() };
            match mode {
                ValidationMode::Strict => return Err(err),
                ValidationMode::Lax => self.warn(&err),
            }
        }
        self.entities.insert(entity.iri.clone(), entity);
        Ok(true)
    }

    /// Adds a triple, returning `Ok(false)` when (S,P,O) is already stored.
    pub fn add_triple(&mut self, triple: Triple, mode: ValidationMode) -> Result<bool, GraphError> {
        let confidence = triple.provenance.confidence;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(GraphError::InvalidConfidence(confidence));
        }
        if let Err(err) = self.check_triple(&triple) {
            match mode {
                ValidationMode::Strict => return Err(err),
                ValidationMode::Lax => self.warn(&err),
            }
        }
        Ok(self.insert(triple))
    }

    fn check_triple(&self, triple: &Triple) -> Result<(), GraphError> {
        let prop = self
            .ontology
            .property(&triple.predicate)
            .ok_or_else(|| GraphError::UnknownPredicate(triple.predicate.clone()))?;
        if !self.entities.contains_key(&triple.subject) {
            return Err(GraphError::UnknownSubject(triple.subject.clone()));
        }
        match (&prop.kind, &triple.object) {
            (PropertyKind::Object, Term::Iri { value }) => {
                // Foreign IRIs are external references and are not resolved.
                if value.is_local() && !self.entities.contains_key(value) {
                    return Err(GraphError::UnknownObject(value.clone()));
                }
                Ok(())
            }
            (PropertyKind::Datatype, Term::Literal { .. }) => Ok(()),
            _ => Err(GraphError::ObjectKindMismatch { predicate: triple.predicate.clone() }),
        }
    }

    fn warn(&mut self, err: &GraphError) {
        log::warn!("lax insert: {err}");
        self.warnings.push(ValidationWarning { message: err.to_string() });
    }

    /// Unvalidated insert shared by `add_triple` and import.
    pub(crate) fn insert(&mut self, triple: Triple) -> bool {
        let key = (triple.subject, triple.predicate, triple.object);
        if let Some(&idx) = self.by_key.get(&key) {
            let stored = &mut self.triples[idx];
            if stored.provenance != triple.provenance && !stored.audit.contains(&triple.provenance) {
                stored.audit.push(triple.provenance);
            }
            return false;
        }
        let idx = self.triples.len();
        let (subject, predicate, object) = key;
        self.by_subject.entry(subject.clone()).or_default().push(idx);
        self.by_predicate.entry(predicate.clone()).or_default().push(idx);
        self.by_object.entry(object.clone()).or_default().push(idx);
        self.by_key.insert((subject.clone(), predicate.clone(), object.clone()), idx);
        self.triples.push(StoredTriple { subject, predicate, object, provenance: triple.provenance, audit: Vec::new() });
        true
    }

    pub(crate) fn insert_stored(&mut self, stored: StoredTriple) {
        let audit = stored.audit;
        let triple = Triple::new(stored.subject, stored.predicate, stored.object, stored.provenance);
        let key = (triple.subject.clone(), triple.predicate.clone(), triple.object.clone());
        self.insert(triple);
        let idx = self.by_key[&key];
        for prov in audit {
            if !self.triples[idx].audit.contains(&prov) {
                self.triples[idx].audit.push(prov);
            }
        }
    }

    pub(crate) fn insert_entity_unchecked(&mut self, entity: Entity) {
        self.entities.insert(entity.iri.clone(), entity);
    }

    pub fn contains(&self, subject: &Iri, predicate: &Iri, object: &Term) -> bool {
        self.by_key.contains_key(&(subject.clone(), predicate.clone(), object.clone()))
    }

    pub fn with_subject<'a>(&'a self, subject: &Iri) -> impl Iterator<Item = &'a StoredTriple> + 'a {
        self.bucket(self.by_subject.get(subject))
    }

    pub fn with_predicate<'a>(&'a self, predicate: &Iri) -> impl Iterator<Item = &'a StoredTriple> + 'a {
        self.bucket(self.by_predicate.get(predicate))
    }

    pub fn with_object<'a>(&'a self, object: &Term) -> impl Iterator<Item = &'a StoredTriple> + 'a {
        self.bucket(self.by_object.get(object))
    }

    fn bucket<'a>(&'a self, ids: Option<&'a Vec<usize>>) -> impl Iterator<Item = &'a StoredTriple> + 'a {
        ids.into_iter().flatten().map(move |&i| &self.triples[i])
    }

    /// Triples matching a pattern; `None` positions are wildcards. Uses the
    /// smallest applicable index bucket.
    pub fn matching<'a>(
        &'a self,
        subject: Option<&Iri>,
        predicate: Option<&Iri>,
        object: Option<&Term>,
    ) -> Vec<&'a StoredTriple> {
        let mut buckets: Vec<Option<&Vec<usize>>> = Vec::new();
        if let Some(s) = subject {
            buckets.push(self.by_subject.get(s));
        }
        if let Some(p) = predicate {
            buckets.push(self.by_predicate.get(p));
        }
        if let Some(o) = object {
            buckets.push(self.by_object.get(o));
        }
        let accept = |t: &StoredTriple| {
            subject.is_none_or(|s| &t.subject == s)
                && predicate.is_none_or(|p| &t.predicate == p)
                && object.is_none_or(|o| &t.object == o)
        };
        if buckets.is_empty() {
            return self.triples.iter().collect();
        }
        if buckets.iter().any(Option::is_none) {
            return Vec::new();
        }
        let smallest = buckets.into_iter().flatten().min_by_key(|b| b.len()).expect("nonempty");
        smallest.iter().map(|&i| &self.triples[i]).filter(|t| accept(t)).collect()
    }

    /// Literal or IRI values of `(subject, predicate, ·)`.
    pub fn objects<'a>(&'a self, subject: &Iri, predicate: &Iri) -> Vec<&'a Term> {
        self.with_subject(subject).filter(|t| &t.predicate == predicate).map(|t| &t.object).collect()
    }

    /// Neighbours of `iri` over object-valued triples in either direction,
    /// with the connecting predicates.
    pub fn neighbours(&self, iri: &Iri) -> BTreeMap<Iri, Vec<Iri>> {
        let mut out: BTreeMap<Iri, Vec<Iri>> = BTreeMap::new();
        for t in self.with_subject(iri) {
            if let Some(obj) = t.object.as_iri() {
                if obj != iri && self.entities.contains_key(obj) {
                    out.entry(obj.clone()).or_default().push(t.predicate.clone());
                }
            }
        }
        for t in self.with_object(&Term::iri(iri.clone())) {
            if &t.subject != iri && self.entities.contains_key(&t.subject) {
                out.entry(t.subject.clone()).or_default().push(t.predicate.clone());
            }
        }
        out
    }

    /// Checks that the three indexes and the key map agree exactly with the
    /// triple list.
    pub fn indexes_consistent(&self) -> bool {
        if self.by_key.len() != self.triples.len() {
            return false;
        }
        fn total<K>(m: &HashMap<K, Vec<usize>>) -> usize {
            m.values().map(Vec::len).sum()
        }
        if total(&self.by_subject) != self.triples.len()
            || total(&self.by_predicate) != self.triples.len()
            || total(&self.by_object) != self.triples.len()
        {
            return false;
        }
        self.triples.iter().enumerate().all(|(i, t)| {
            self.by_subject.get(&t.subject).is_some_and(|v| v.contains(&i))
                && self.by_predicate.get(&t.predicate).is_some_and(|v| v.contains(&i))
                && self.by_object.get(&t.object).is_some_and(|v| v.contains(&i))
                && self.by_key.get(&(t.subject.clone(), t.predicate.clone(), t.object.clone())) == Some(&i)
        })
    }

    /// Mints a local IRI for `label`, suffixing `_2`, `_3`, … when the slug is
    /// already taken by an entity with a different label.
    pub fn mint_iri(&self, kind: &str, label: &str) -> Iri {
        let base = Iri::local(kind, label);
        match self.entities.get(&base) {
            None => base,
            Some(e) if e.label == label => base,
            Some(_) => (2..)
                .map(|n| Iri::local(kind, &format!("{label} {n}")))
                .find(|iri| self.entities.get(iri).is_none_or(|e| e.label == label))
                .expect("unbounded search"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::term::{Literal, Method};
    use crate::model::vocab;

    fn iri(s: &str) -> Iri {
        s.parse().unwrap()
    }

    fn graph() -> KnowledgeGraph {
        let ontology = Ontology::from_json(
            r#"{"classes": [{"iri": "edukg://class/Event", "label": "Event"}],
                "properties": [
                    {"iri": "edukg://prop/startingTime", "label": "starting time", "kind": "datatype", "range": "date"},
                    {"iri": "edukg://prop/causedBy", "label": "caused by", "kind": "object"}
                ]}"#,
        )
        .unwrap();
        let mut kg = KnowledgeGraph::new(ontology);
        for name in ["FrenchRevolution", "Enlightenment"] {
            kg.add_entity(
                Entity::concept(iri(&format!("edukg://concept/{name}")), name, iri("edukg://class/Event")),
                ValidationMode::Strict,
            )
            .unwrap();
        }
        kg
    }

    fn prov() -> Provenance {
        Provenance::new("test", Method::Human, 1.0)
    }

    #[test]
    fn strict_rejects_unknown_predicate() {
        let mut kg = graph();
        let t = Triple::new(iri("edukg://concept/FrenchRevolution"), iri("edukg://prop/nope"), Term::text("x"), prov());
        assert_eq!(kg.add_triple(t, ValidationMode::Strict), Err(GraphError::UnknownPredicate(iri("edukg://prop/nope"))));
        assert_eq!(kg.triple_count(), 0);
    }

    #[test]
    fn strict_rejects_unknown_subject_and_object() {
        let mut kg = graph();
        let t = Triple::new(iri("edukg://concept/Ghost"), iri("edukg://prop/causedBy"), Term::iri(iri("edukg://concept/Enlightenment")), prov());
        assert!(matches!(kg.add_triple(t, ValidationMode::Strict), Err(GraphError::UnknownSubject(_))));
        let t = Triple::new(iri("edukg://concept/FrenchRevolution"), iri("edukg://prop/causedBy"), Term::iri(iri("edukg://concept/Ghost")), prov());
        assert!(matches!(kg.add_triple(t, ValidationMode::Strict), Err(GraphError::UnknownObject(_))));
        // Foreign IRIs pass through.
        let t = Triple::new(iri("edukg://concept/FrenchRevolution"), vocab::iri(vocab::EXTERNAL_EQUIVALENT), Term::iri(iri("http://xlore.org/i/42")), prov());
        assert_eq!(kg.add_triple(t, ValidationMode::Strict), Ok(true));
    }

    #[test]
    fn object_property_with_literal_is_kind_mismatch() {
        let mut kg = graph();
        let t = Triple::new(iri("edukg://concept/FrenchRevolution"), iri("edukg://prop/causedBy"), Term::text("the Enlightenment"), prov());
        assert!(matches!(kg.add_triple(t.clone(), ValidationMode::Strict), Err(GraphError::ObjectKindMismatch { .. })));
        assert_eq!(kg.add_triple(t, ValidationMode::Lax), Ok(true));
        assert_eq!(kg.warnings().len(), 1);
    }

    #[test]
    fn duplicate_triple_is_idempotent() {
        let mut kg = graph();
        let t = Triple::new(
            iri("edukg://concept/FrenchRevolution"),
            iri("edukg://prop/startingTime"),
            Term::literal(Literal::typed("1789", crate::model::Datatype::Date)),
            prov(),
        );
        assert_eq!(kg.add_triple(t.clone(), ValidationMode::Strict), Ok(true));
        let before = kg.clone();
        assert_eq!(kg.add_triple(t.clone(), ValidationMode::Strict), Ok(false));
        assert_eq!(kg.triple_count(), 1);
        assert_eq!(kg, before);
        assert!(kg.triples()[0].audit.is_empty());

        let mut other = t;
        other.provenance = Provenance::new("openie-run", Method::Openie, 0.4);
        assert_eq!(kg.add_triple(other.clone(), ValidationMode::Strict), Ok(false));
        assert_eq!(kg.add_triple(other, ValidationMode::Strict), Ok(false));
        assert_eq!(kg.triples()[0].provenance.method, Method::Human);
        assert_eq!(kg.triples()[0].audit.len(), 1);
        assert!(kg.indexes_consistent());
    }

    #[test]
    fn confidence_outside_unit_interval_rejected() {
        let mut kg = graph();
        let t = Triple::new(
            iri("edukg://concept/FrenchRevolution"),
            iri("edukg://prop/startingTime"),
            Term::text("1789"),
            Provenance::new("x", Method::Ner, 1.5),
        );
        assert!(matches!(kg.add_triple(t, ValidationMode::Lax), Err(GraphError::InvalidConfidence(_))));
    }

    #[test]
    fn pattern_lookup_uses_indexes() {
        let mut kg = graph();
        let fr = iri("edukg://concept/FrenchRevolution");
        let en = iri("edukg://concept/Enlightenment");
        kg.add_triple(Triple::new(fr.clone(), iri("edukg://prop/causedBy"), Term::iri(en.clone()), prov()), ValidationMode::Strict).unwrap();
        kg.add_triple(Triple::new(fr.clone(), iri("edukg://prop/startingTime"), Term::text("1789"), prov()), ValidationMode::Strict).unwrap();
        assert_eq!(kg.matching(Some(&fr), None, None).len(), 2);
        assert_eq!(kg.matching(None, Some(&iri("edukg://prop/causedBy")), None).len(), 1);
        assert_eq!(kg.matching(None, None, Some(&Term::iri(en.clone()))).len(), 1);
        assert!(kg.matching(Some(&en), Some(&iri("edukg://prop/causedBy")), None).is_empty());
        assert_eq!(kg.neighbours(&en).keys().collect::<Vec<_>>(), vec![&fr]);
    }

    #[test]
    fn entity_conflicts_detected() {
        let mut kg = graph();
        let e = Entity::concept(iri("edukg://concept/FrenchRevolution"), "FrenchRevolution", iri("edukg://class/Event"));
        assert_eq!(kg.add_entity(e.clone(), ValidationMode::Strict), Ok(false));
        let changed = e.with_description("1789-1799");
        assert!(matches!(kg.add_entity(changed, ValidationMode::Strict), Err(GraphError::EntityConflict(_))));
        let unknown_class = Entity::concept(iri("edukg://concept/X"), "X", iri("edukg://class/Nope"));
        assert!(matches!(kg.add_entity(unknown_class, ValidationMode::Strict), Err(GraphError::UnknownClass { .. })));
    }

    #[test]
    fn mint_iri_avoids_collisions() {
        let mut kg = graph();
        let a = kg.mint_iri("concept", "Capacitance");
        kg.add_entity(Entity::concept(a.clone(), "Capacitance", vocab::iri(vocab::CONCEPT)), ValidationMode::Strict).unwrap();
        assert_eq!(kg.mint_iri("concept", "Capacitance"), a);
        let b = kg.mint_iri("concept", "capacitance");
        assert_ne!(a, b);
        assert_eq!(b.as_str(), "edukg://concept/capacitance_2");
    }
}
