//! Two-stage annotation sessions backed by an append-only event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::candidates::{confidence, rank_candidates, EntityCandidate, FeedbackMode, Judgement, Status};
use super::triples::{gen_triple_candidates, AcceptedEntity, PredicateRef, TripleCandidate, TripleSources};
use super::AcquisitionError;
use crate::textindex::char_slice;
use crate::model::{slugify, vocab, Entity, Iri, KnowledgeGraph, Method, Provenance, Term, Triple, ValidationMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Stage {
    EntityStage,
    TripleStage,
}

/// Field changes an annotator makes without judging the candidate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EditPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_iri: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<PredicateRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "camelCase")]
pub enum Verdict {
    Accept,
    Reject,
    /// Changes fields only; P and status are untouched.
    Edit(EditPatch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum SessionEvent {
    #[serde(rename_all = "camelCase")]
    Created {
        session_id: String,
        doc_id: String,
        text: String,
        alpha: f64,
        feedback: FeedbackMode,
        candidates: Vec<EntityCandidate>,
        timestamp_ms: u64,
    },
    #[serde(rename_all = "camelCase")]
    Label { candidate_id: String, verdict: Verdict, annotator: String, timestamp_ms: u64 },
    /// A span the recognizers missed, added by hand with S = 0.
    #[serde(rename_all = "camelCase")]
    AddCandidate { candidate: EntityCandidate, annotator: String, timestamp_ms: u64 },
    #[serde(rename_all = "camelCase")]
    CommitEntities { entities: Vec<AcceptedEntity>, timestamp_ms: u64 },
    #[serde(rename_all = "camelCase")]
    Advance { candidates: Vec<TripleCandidate>, timestamp_ms: u64 },
    #[serde(rename_all = "camelCase")]
    CommitTriples { timestamp_ms: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommitReport {
    pub entities_added: usize,
    pub triples_added: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnotationSession {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub alpha: f64,
    pub feedback: FeedbackMode,
    pub stage: Stage,
    pub entities_committed: bool,
    pub triples_committed: bool,
    /// Ranked by P descending, ties by id.
    pub entity_candidates: Vec<EntityCandidate>,
    pub triple_candidates: Vec<TripleCandidate>,
    pub accepted: Vec<AcceptedEntity>,
    #[serde(skip)]
    log: Vec<SessionEvent>,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl AnnotationSession {
    pub fn create(
        id: impl Into<String>,
        doc_id: impl Into<String>,
        text: impl Into<String>,
        mut candidates: Vec<EntityCandidate>,
        alpha: f64,
        feedback: FeedbackMode,
        timestamp_ms: u64,
    ) -> Result<Self, AcquisitionError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(AcquisitionError::InvalidAlpha(alpha));
        }
        for c in &mut candidates {
            c.pos_count = 0;
            c.neg_count = 0;
            c.status = Status::Pending;
            c.confidence = c.base_score;
        }
        rank_candidates(&mut candidates);
        let event = SessionEvent::Created {
            session_id: id.into(),
            doc_id: doc_id.into(),
            text: text.into(),
            alpha,
            feedback,
            candidates,
            timestamp_ms,
        };
        Self::replay(std::iter::once(event))
    }

    /// Rebuilds a session from its log. The first event must be `Created`.
    pub fn replay(events: impl IntoIterator<Item = SessionEvent>) -> Result<Self, AcquisitionError> {
        let mut events = events.into_iter();
        let Some(first @ SessionEvent::Created { .. }) = events.next() else {
            return Err(AcquisitionError::Replay("log does not start with a created event".into()));
        };
        let SessionEvent::Created { session_id, doc_id, text, alpha, feedback, candidates, .. } = first.clone() else {
            unreachable!()
        };
        let mut session = AnnotationSession {
            id: session_id,
            doc_id,
            text,
            alpha,
            feedback,
            stage: Stage::EntityStage,
            entities_committed: false,
            triples_committed: false,
            entity_candidates: candidates,
            triple_candidates: Vec::new(),
            accepted: Vec::new(),
            log: vec![first],
        };
        for event in events {
            session.apply(event)?;
        }
        Ok(session)
    }

    pub fn log(&self) -> &[SessionEvent] {
        &self.log
    }

    fn violation(&self, action: &str) -> AcquisitionError {
        AcquisitionError::StageViolation(format!(
            "{action} not allowed in {:?} (entities committed: {}, triples committed: {})",
            self.stage, self.entities_committed, self.triples_committed
        ))
    }

    /// Checks an event against the current state and applies it.
    fn apply(&mut self, event: SessionEvent) -> Result<(), AcquisitionError> {
        match &event {
            SessionEvent::Created { .. } => return Err(AcquisitionError::Replay("second created event".into())),
            SessionEvent::Label { candidate_id, verdict, .. } => self.apply_label(candidate_id, verdict)?,
            SessionEvent::AddCandidate { candidate, .. } => {
                if self.stage != Stage::EntityStage || self.entities_committed {
                    return Err(self.violation("adding a candidate"));
                }
                if self.entity_candidates.iter().any(|c| c.id == candidate.id) {
                    return Err(AcquisitionError::DuplicateCandidate(candidate.id.clone()));
                }
                self.entity_candidates.push(candidate.clone());
                rank_candidates(&mut self.entity_candidates);
            }
            SessionEvent::CommitEntities { entities, .. } => {
                if self.stage != Stage::EntityStage || self.entities_committed {
                    return Err(self.violation("entity commit"));
                }
                self.accepted = entities.clone();
                self.entities_committed = true;
            }
            SessionEvent::Advance { candidates, .. } => {
                if self.stage != Stage::EntityStage || !self.entities_committed {
                    return Err(self.violation("advance"));
                }
                self.triple_candidates = candidates.clone();
                self.stage = Stage::TripleStage;
            }
            SessionEvent::CommitTriples { .. } => {
                if self.stage != Stage::TripleStage || self.triples_committed {
                    return Err(self.violation("triple commit"));
                }
                self.triples_committed = true;
            }
        }
        self.log.push(event);
        Ok(())
    }

    fn apply_label(&mut self, candidate_id: &str, verdict: &Verdict) -> Result<(), AcquisitionError> {
        let unknown = || AcquisitionError::UnknownCandidate(candidate_id.to_owned());
        match self.stage {
            Stage::EntityStage if !self.entities_committed => {
                let (alpha, mode) = (self.alpha, self.feedback);
                let c = self.entity_candidates.iter_mut().find(|c| c.id == candidate_id).ok_or_else(unknown)?;
                match verdict {
                    Verdict::Accept => c.update_confidence(Judgement::Accept, alpha, mode),
                    Verdict::Reject => c.update_confidence(Judgement::Reject, alpha, mode),
                    Verdict::Edit(patch) => {
                        if let Some(label) = &patch.label {
                            c.label = label.clone();
                        }
                        if let Some(class) = &patch.class_iri {
                            c.suggested_class = class.clone();
                        }
                        if let Some(external) = &patch.external {
                            c.linked_external = Some(external.clone());
                        }
                    }
                }
                rank_candidates(&mut self.entity_candidates);
            }
            Stage::TripleStage if !self.triples_committed => {
                let t = self.triple_candidates.iter_mut().find(|t| t.id == candidate_id).ok_or_else(unknown)?;
                match verdict {
                    Verdict::Accept => t.status = Status::Accepted,
                    Verdict::Reject => t.status = Status::Rejected,
                    Verdict::Edit(patch) => {
                        if let Some(p) = &patch.predicate {
                            t.predicate = p.clone();
                        }
                        if let Some(tail) = &patch.tail {
                            t.tail = tail.clone();
                        }
                    }
                }
            }
            _ => return Err(self.violation("labelling")),
        }
        Ok(())
    }

    pub fn label(&mut self, candidate_id: &str, verdict: Verdict, annotator: &str, timestamp_ms: u64) -> Result<&SessionEvent, AcquisitionError> {
        self.apply(SessionEvent::Label {
            candidate_id: candidate_id.to_owned(),
            verdict,
            annotator: annotator.to_owned(),
            timestamp_ms,
        })?;
        Ok(self.log.last().expect("just pushed"))
    }

    /// Adds a hand-marked span `[start, end)` (char offsets) as a pending
    /// candidate with base score 0.
    pub fn add_candidate(
        &mut self,
        start: usize,
        end: usize,
        class_iri: Iri,
        annotator: &str,
        timestamp_ms: u64,
    ) -> Result<&SessionEvent, AcquisitionError> {
        let len = self.text.chars().count();
        if start >= end || end > len {
            return Err(AcquisitionError::BadSpan { start, end, len });
        }
        let surface = char_slice(&self.text, start, end);
        let candidate = EntityCandidate {
            id: format!("ent:{start}-{end}"),
            start,
            end,
            surface: surface.clone(),
            label: surface,
            suggested_class: class_iri,
            base_score: 0.0,
            pos_count: 0,
            neg_count: 0,
            confidence: 0.0,
            entity_iri: None,
            linked_external: None,
            status: Status::Pending,
        };
        self.apply(SessionEvent::AddCandidate { candidate, annotator: annotator.to_owned(), timestamp_ms })?;
        Ok(self.log.last().expect("just pushed"))
    }

    fn entity_candidate(&self, id: &str) -> Option<&EntityCandidate> {
        self.entity_candidates.iter().find(|c| c.id == id)
    }

    fn provenance(&self, confidence: f64) -> Provenance {
        Provenance::new(format!("session:{}", self.id), Method::Human, confidence.clamp(0.0, 1.0))
    }

    /// Commits the current stage into `kg`. A stage already committed
    /// reports zero additions; the returned event is `None` then.
    pub fn commit(&mut self, kg: &mut KnowledgeGraph, timestamp_ms: u64) -> Result<(CommitReport, Option<&SessionEvent>), AcquisitionError> {
        match self.stage {
            Stage::EntityStage if self.entities_committed => Ok((CommitReport::default(), None)),
            Stage::TripleStage if self.triples_committed => Ok((CommitReport::default(), None)),
            Stage::EntityStage => {
                let (report, entities) = self.commit_entities(kg)?;
                self.apply(SessionEvent::CommitEntities { entities, timestamp_ms })?;
                Ok((report, self.log.last()))
            }
            Stage::TripleStage => {
                let report = self.commit_triples(kg)?;
                self.apply(SessionEvent::CommitTriples { timestamp_ms })?;
                Ok((report, self.log.last()))
            }
        }
    }

    fn commit_entities(&self, kg: &mut KnowledgeGraph) -> Result<(CommitReport, Vec<AcceptedEntity>), AcquisitionError> {
        let pending: Vec<String> =
            self.entity_candidates.iter().filter(|c| c.status == Status::Pending).map(|c| c.id.clone()).collect();
        if !pending.is_empty() {
            return Err(AcquisitionError::StageIncomplete { pending });
        }
        let mut chosen: Vec<&EntityCandidate> = self.entity_candidates.iter().filter(|c| c.status == Status::Accepted).collect();
        chosen.sort_by_key(|c| (c.start, c.end));
        let mut report = CommitReport::default();
        let mut accepted = Vec::new();
        for c in chosen {
            let existing = c.entity_iri.clone().filter(|iri| kg.entity(iri).is_some()).or_else(|| {
                let natural = Iri::local("concept", &slugify(&c.label));
                kg.entity(&natural).filter(|e| e.label == c.label && e.class_iri == c.suggested_class).map(|_| natural)
            });
            let iri = match existing {
                Some(iri) => iri,
                None => {
                    let iri = kg.mint_iri("concept", &c.label);
                    kg.add_entity(Entity::concept(iri.clone(), c.label.clone(), c.suggested_class.clone()), ValidationMode::Strict)?;
                    report.entities_added += 1;
                    iri
                }
            };
            if let Some(external) = &c.linked_external {
                let t = Triple::new(iri.clone(), vocab::iri(vocab::EXTERNAL_EQUIVALENT), Term::iri(external.clone()), self.provenance(c.confidence));
                if kg.add_triple(t, ValidationMode::Strict)? {
                    report.triples_added += 1;
                }
            }
            accepted.push(AcceptedEntity {
                candidate_id: c.id.clone(),
                iri,
                start: c.start,
                end: c.end,
                surface: c.surface.clone(),
                label: c.label.clone(),
                external: c.linked_external.clone(),
            });
        }
        Ok((report, accepted))
    }

    fn commit_triples(&self, kg: &mut KnowledgeGraph) -> Result<CommitReport, AcquisitionError> {
        let pending: Vec<String> =
            self.triple_candidates.iter().filter(|t| t.status == Status::Pending).map(|t| t.id.clone()).collect();
        if !pending.is_empty() {
            return Err(AcquisitionError::StageIncomplete { pending });
        }
        let chosen: Vec<&TripleCandidate> = self.triple_candidates.iter().filter(|t| t.status == Status::Accepted).collect();
        if let Some(t) = chosen.iter().find(|t| t.predicate == PredicateRef::Unresolved) {
            return Err(AcquisitionError::UnresolvedPredicate(t.id.clone()));
        }
        let mut report = CommitReport::default();
        for t in chosen {
            let p = t
                .head_candidate
                .as_deref()
                .and_then(|id| self.entity_candidate(id))
                .map_or(1.0, |c| confidence(c.base_score, c.pos_count, c.neg_count, self.alpha, self.feedback));
            let (predicate, object) = match &t.predicate {
                PredicateRef::Property { iri } => (iri.clone(), t.tail.clone()),
                PredicateRef::Raw { text } => {
                    (vocab::iri(vocab::RAW_ASSERTION), Term::text(format!("{} {}", text, t.tail.lexical())))
                }
                PredicateRef::Unresolved => unreachable!("checked above"),
            };
            if kg.add_triple(Triple::new(t.head.clone(), predicate, object, self.provenance(p)), ValidationMode::Strict)? {
                report.triples_added += 1;
            }
        }
        Ok(report)
    }

    /// Moves to the triple stage, generating candidates from the committed
    /// entities.
    pub fn advance(&mut self, kg: &KnowledgeGraph, sources: &TripleSources<'_>, timestamp_ms: u64) -> Result<&SessionEvent, AcquisitionError> {
        if self.stage != Stage::EntityStage || !self.entities_committed {
            return Err(self.violation("advance"));
        }
        let candidates = gen_triple_candidates(&self.text, &self.accepted, kg, sources)?;
        self.apply(SessionEvent::Advance { candidates, timestamp_ms })?;
        Ok(self.log.last().expect("just pushed"))
    }
}

/// Append-only JSONL file of session events, flushed and synced per event.
#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: File,
}

impl SessionLog {
    /// Creates the file and writes the session's whole log so far.
    pub fn create(path: impl AsRef<Path>, session: &AnnotationSession) -> Result<Self, AcquisitionError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| AcquisitionError::log(&path, e))?;
        let mut log = SessionLog { path, file };
        for event in session.log() {
            log.append(event)?;
        }
        Ok(log)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, AcquisitionError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| AcquisitionError::log(&path, e))?;
        Ok(SessionLog { path, file })
    }

    pub fn append(&mut self, event: &SessionEvent) -> Result<(), AcquisitionError> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| AcquisitionError::log(&self.path, e))?;
        self.file.sync_data().map_err(|e| AcquisitionError::log(&self.path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, AcquisitionError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| AcquisitionError::log(path, e))?;
        let mut out = Vec::new();
        for (k, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AcquisitionError::log(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| AcquisitionError::Replay(format!("{}:{}: {e}", path.display(), k + 1)))?;
            out.push(event);
        }
        Ok(out)
    }
}

pub fn load_session(path: impl AsRef<Path>) -> Result<AnnotationSession, AcquisitionError> {
    AnnotationSession::replay(SessionLog::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{detect_candidates, GazetteerRecognizer};
    use crate::model::Ontology;
    use crate::textindex::HashedTrigramProvider;

    const TEXT: &str = "The Industrial Revolution widened the wealth gap. Steam engines spread.";

    fn session() -> AnnotationSession {
        let mut g = GazetteerRecognizer::new("dict", 0.5);
        for s in ["Industrial Revolution", "wealth gap", "Steam engines"] {
            g.insert(s, vocab::iri(vocab::CONCEPT), None, None);
        }
        let candidates = detect_candidates(TEXT, &[&g]).unwrap();
        AnnotationSession::create("s1", "doc1", TEXT, candidates, 0.1, FeedbackMode::Signed, 1).unwrap()
    }

    fn sources(provider: &HashedTrigramProvider) -> TripleSources<'_> {
        TripleSources { external: None, openie: None, provider, tau_map: 0.5 }
    }

    #[test]
    fn label_updates_and_reranks() {
        let mut s = session();
        s.label("ent:38-48", Verdict::Accept, "ann", 2).unwrap();
        assert_eq!(s.entity_candidates[0].id, "ent:38-48");
        assert!((s.entity_candidates[0].confidence - 0.6).abs() < 1e-12);
        s.label("ent:4-25", Verdict::Reject, "ann", 3).unwrap();
        assert_eq!(s.entity_candidates.last().unwrap().id, "ent:4-25");
        assert!(matches!(s.label("nope", Verdict::Accept, "ann", 4), Err(AcquisitionError::UnknownCandidate(_))));
    }

    #[test]
    fn full_two_stage_flow() {
        let provider = HashedTrigramProvider::default();
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        let mut s = session();
        assert!(matches!(s.advance(&kg, &sources(&provider), 2), Err(AcquisitionError::StageViolation(_))));
        s.label("ent:4-25", Verdict::Accept, "ann", 2).unwrap();
        s.label("ent:38-48", Verdict::Accept, "ann", 3).unwrap();
        assert!(matches!(s.commit(&mut kg, 4), Err(AcquisitionError::StageIncomplete { .. })));
        s.label("ent:50-63", Verdict::Reject, "ann", 5).unwrap();
        let (report, _) = s.commit(&mut kg, 6).unwrap();
        assert_eq!(report, CommitReport { entities_added: 2, triples_added: 0 });
        assert_eq!(s.commit(&mut kg, 7).unwrap().0, CommitReport::default());
        assert!(matches!(s.label("ent:4-25", Verdict::Accept, "ann", 8), Err(AcquisitionError::StageViolation(_))));

        s.advance(&kg, &sources(&provider), 9).unwrap();
        assert_eq!(s.triple_candidates.len(), 1);
        s.label("tri:1", Verdict::Accept, "ann", 10).unwrap();
        assert!(matches!(s.commit(&mut kg, 11), Err(AcquisitionError::UnresolvedPredicate(_))));
        let patch = EditPatch { predicate: Some(PredicateRef::Raw { text: "widened".into() }), ..Default::default() };
        s.label("tri:1", Verdict::Edit(patch), "ann", 12).unwrap();
        let (report, _) = s.commit(&mut kg, 13).unwrap();
        assert_eq!(report.triples_added, 1);
        let t = &kg.triples()[0];
        assert_eq!(t.predicate.as_str(), vocab::RAW_ASSERTION);
        assert_eq!(t.object.lexical(), "widened edukg://concept/wealth_gap");
        assert_eq!(t.provenance.method, Method::Human);
        assert!((t.provenance.confidence - 0.6).abs() < 1e-12);
        assert_eq!(s.commit(&mut kg, 14).unwrap().0, CommitReport::default());

        let replayed = AnnotationSession::replay(s.log().to_vec()).unwrap();
        assert_eq!(replayed, s);
    }

    #[test]
    fn hand_added_candidate_starts_at_zero() {
        let mut s = session();
        s.add_candidate(56, 62, vocab::iri(vocab::CONCEPT), "ann", 2).unwrap();
        let c = s.entity_candidates.iter().find(|c| c.id == "ent:56-62").unwrap();
        assert_eq!((c.surface.as_str(), c.confidence), ("engine", 0.0));
        assert_eq!(s.entity_candidates.last().unwrap().id, "ent:56-62");
        assert!(matches!(s.add_candidate(56, 62, vocab::iri(vocab::CONCEPT), "ann", 3), Err(AcquisitionError::DuplicateCandidate(_))));
        assert!(matches!(s.add_candidate(5, 500, vocab::iri(vocab::CONCEPT), "ann", 3), Err(AcquisitionError::BadSpan { .. })));
        assert_eq!(AnnotationSession::replay(s.log().to_vec()).unwrap(), s);
    }

    #[test]
    fn all_rejected_leaves_graph_unchanged() {
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        let before = kg.clone();
        let mut s = session();
        for id in ["ent:4-25", "ent:38-48", "ent:50-63"] {
            s.label(id, Verdict::Reject, "ann", 2).unwrap();
        }
        assert_eq!(s.commit(&mut kg, 3).unwrap().0, CommitReport::default());
        assert_eq!(kg, before);
    }

    #[test]
    fn durable_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.jsonl");
        let mut s = session();
        let mut log = SessionLog::create(&path, &s).unwrap();
        let e = s.label("ent:4-25", Verdict::Accept, "ann", 2).unwrap().clone();
        log.append(&e).unwrap();
        let e = s.label("ent:4-25", Verdict::Edit(EditPatch { label: Some("industrial revolution".into()), ..Default::default() }), "ann", 3).unwrap().clone();
        SessionLog::open(&path).unwrap().append(&e).unwrap();
        let loaded = load_session(&path).unwrap();
        assert_eq!(loaded, s);
        assert_eq!(loaded.entity_candidates[0].label, "industrial revolution");
        assert!(SessionLog::create(&path, &s).is_err());
    }
}
