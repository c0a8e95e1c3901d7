//! The operations both front ends call. Reads run on a graph snapshot;
//! writes pass the graph's single-writer gate and, when a graph path is
//! configured, reach disk before they are published.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Config, GatewayError};
use crate::acquisition::{
    detect_candidates, now_ms, AnnotationSession, CommandOpenIe, CommitReport, GazetteerRecognizer, LinkerRecognizer,
    OpenIeExtractor, Recognizer, SessionLog, TripleSources, Verdict,
};
use crate::consolidation::{
    concept_gazetteer, consolidate_roles, expand_concepts, ExpansionReport, ExternalAlignment, RoleRegistry, RoleReport,
};
use crate::edulink::{datum_iri, index_record, HeteroRecord, IndexReport, Linker};
use crate::ingest::{
    assign_key_topics, book_tfidf, link_exercise_topics, segment_textbook, store_book, store_exercises, ExerciseParser,
    HeadingRules, RawExercise, SectionTopics, TopicCatalog,
};
use crate::model::ntriples::{parse_ntriples, Statement};
use crate::model::persist::{self, sidecar_path};
use crate::model::{
    export_graph, humanize_local_name, vocab, Entity, ExternalKg, Iri, KnowledgeGraph, Method, Ontology, PropertyDef,
    PropertyKind, Provenance, SharedGraph, slugify, Snapshot, Term, Triple, ValidationMode,
};
use crate::qa::{answer, Answer, TemplateSet};
use crate::textindex::{EmbeddingProvider, IndexedEntity, InvertedIndex, SearchHit};

/// Base score of a span that names a concept already in the graph.
pub const GRAPH_MATCH_SCORE: f64 = 0.5;

fn read_text(path: &Path) -> Result<String, GatewayError> {
    fs::read_to_string(path).map_err(|e| GatewayError::io(path, e))
}

/// Builds a graph from bare statements. `rdfs:label` and description
/// statements become entity metadata; predicates the ontology does not
/// declare are added as datatype or object properties after their first
/// object; every other statement is added leniently.
pub fn graph_from_statements(statements: Vec<Statement>, ontology: Ontology, source: &str) -> Result<KnowledgeGraph, GatewayError> {
    let label = vocab::iri(vocab::LABEL);
    let description = vocab::iri(vocab::DESCRIPTION);
    let mut labels: BTreeMap<Iri, String> = BTreeMap::new();
    let mut descriptions: BTreeMap<Iri, String> = BTreeMap::new();
    let mut schema = ontology.to_schema();
    let mut declared: BTreeSet<Iri> = schema.properties.iter().map(|p| p.iri.clone()).collect();
    for st in &statements {
        match &st.object {
            Term::Literal { value } if st.predicate == label => {
                labels.entry(st.subject.clone()).or_insert_with(|| value.lexical.clone());
                continue;
            }
            Term::Literal { value } if st.predicate == description => {
                descriptions.entry(st.subject.clone()).or_insert_with(|| value.lexical.clone());
                continue;
            }
            _ => {}
        }
        if declared.insert(st.predicate.clone()) {
            let kind = if st.object.as_iri().is_some() { PropertyKind::Object } else { PropertyKind::Datatype };
            schema.properties.push(PropertyDef {
                iri: st.predicate.clone(),
                label: humanize_local_name(&st.predicate),
                kind,
                domain: None,
                range: None,
            });
        }
    }
    let mut kg = KnowledgeGraph::new(Ontology::from_schema(schema)?);
    let class = vocab::iri(vocab::CONCEPT);
    for (iri, l) in labels {
        let d = descriptions.remove(&iri).unwrap_or_default();
        kg.add_entity(Entity::concept(iri, l, class.clone()).with_description(d), ValidationMode::Lax)?;
    }
    for st in statements {
        if st.predicate == label || (st.predicate == description && st.object.as_literal().is_some()) {
            continue;
        }
        let t = Triple::new(st.subject, st.predicate, st.object, Provenance::new(source, Method::Infobox, 1.0));
        kg.add_triple(t, ValidationMode::Lax)?;
    }
    Ok(kg)
}

/// Loads `path` with its metadata sidecar when there is one, otherwise as
/// bare N-Triples over `ontology` (built-ins only when `None`).
pub fn load_graph(path: &Path, ontology: Option<Ontology>) -> Result<KnowledgeGraph, GatewayError> {
    if sidecar_path(path).exists() {
        if ontology.is_some() {
            log::info!("{}: using the ontology stored with the graph", path.display());
        }
        return Ok(persist::load(path)?);
    }
    let file = File::open(path).map_err(|e| GatewayError::io(path, e))?;
    let statements = parse_ntriples(BufReader::new(file))?;
    graph_from_statements(statements, ontology.unwrap_or_else(Ontology::builtin), &format!("import:{}", path.display()))
}

/// Writes both files next to their targets, then renames them into place.
fn save_graph(kg: &KnowledgeGraph, path: &Path) -> Result<(), GatewayError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
    let tmp = path.with_file_name(format!("{stem}.tmp.nt"));
    persist::save(kg, &tmp)?;
    fs::rename(sidecar_path(&tmp), sidecar_path(path)).map_err(|e| GatewayError::io(path, e))?;
    fs::rename(&tmp, path).map_err(|e| GatewayError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateSession {
    #[serde(default)]
    pub session_id: Option<String>,
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelRequest {
    pub candidate_id: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(default = "anonymous")]
    pub annotator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AddCandidateRequest {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub class_iri: Option<Iri>,
    #[serde(default = "anonymous")]
    pub annotator: String,
}

fn anonymous() -> String {
    "anonymous".into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestReport {
    pub book_id: String,
    pub sections: usize,
    pub section_topics: Vec<SectionTopics>,
    pub exercises: usize,
    /// Exercises that failed to parse, as `id: reason`.
    pub exercise_errors: Vec<String>,
    pub entities_added: usize,
    pub triples_added: usize,
}

/// Session ids double as file names.
fn check_session_id(id: &str) -> Result<(), GatewayError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(GatewayError::BadRequest(format!("invalid session id {id:?}")))
    }
}

struct SessionSlot {
    session: AnnotationSession,
    log: Option<SessionLog>,
}

impl SessionSlot {
    /// Appends the events `next` has beyond the current session.
    fn append_new(&mut self, next: &AnnotationSession) -> Result<(), GatewayError> {
        let old = self.session.log().len();
        if let Some(log) = &mut self.log {
            for event in &next.log()[old..] {
                log.append(event)?;
            }
        }
        Ok(())
    }
}

pub struct Engine {
    config: Config,
    graph: SharedGraph,
    provider: Arc<dyn EmbeddingProvider>,
    registry: RoleRegistry,
    templates: TemplateSet,
    external: Option<ExternalKg>,
    external_index: Option<Arc<InvertedIndex>>,
    openie: Option<CommandOpenIe>,
    index_cache: Mutex<Option<(u64, Arc<InvertedIndex>)>>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<SessionSlot>>>>,
}

impl Engine {
    /// Loads the graph named in the config (empty when the file does not
    /// exist yet) and everything else the config points at.
    pub fn open(config: Config) -> Result<Self, GatewayError> {
        let ontology = config.paths.ontology.as_deref().map(Ontology::load).transpose()?;
        let graph = match &config.paths.graph {
            Some(p) if p.exists() => load_graph(p, ontology)?,
            _ => KnowledgeGraph::new(ontology.unwrap_or_else(Ontology::builtin)),
        };
        Self::with_graph(config, graph)
    }

    pub fn with_graph(config: Config, graph: KnowledgeGraph) -> Result<Self, GatewayError> {
        config.validate()?;
        let provider = config.embedding.build()?;
        let registry = match &config.paths.role_templates {
            Some(p) => RoleRegistry::from_json(&read_text(p)?)?,
            None => RoleRegistry::default(),
        };
        let templates = match &config.paths.qa_templates {
            Some(p) => TemplateSet::from_json(&read_text(p)?, graph.ontology(), &registry)?,
            None => TemplateSet::with_role_routes(graph.ontology(), &registry),
        };
        let external = config.paths.external.as_deref().map(ExternalKg::load).transpose()?;
        let external_index = external.as_ref().map(|ext| {
            let entities = ext.labelled_entities().map(|(iri, label)| IndexedEntity {
                iri: iri.clone(),
                label: label.to_owned(),
                aliases: Vec::new(),
                description: ext.description(iri).unwrap_or("").to_owned(),
                role: None,
            });
            Arc::new(InvertedIndex::build(entities, config.tokenizer))
        });
        let openie = config.openie.as_ref().map(|cmd| CommandOpenIe { program: cmd[0].clone(), args: cmd[1..].to_vec() });
        let engine = Engine {
            graph: SharedGraph::new(graph),
            provider,
            registry,
            templates,
            external,
            external_index,
            openie,
            index_cache: Mutex::new(None),
            sessions: Mutex::new(BTreeMap::new()),
            config,
        };
        engine.load_index_file()?;
        engine.resume_sessions()?;
        Ok(engine)
    }

    fn load_index_file(&self) -> Result<(), GatewayError> {
        let Some(path) = self.config.paths.index.as_deref().filter(|p| p.exists()) else { return Ok(()) };
        let file = File::open(path).map_err(|e| GatewayError::io(path, e))?;
        let index = InvertedIndex::read_from(BufReader::new(file))?;
        let snap = self.graph.snapshot();
        let fresh = InvertedIndex::from_graph(&snap.graph, self.config.tokenizer);
        if index.snapshot_id() == fresh.snapshot_id() {
            *self.index_cache.lock().expect("index cache") = Some((snap.revision, Arc::new(index)));
        } else {
            log::warn!("{}: index does not match the graph; using a rebuilt one", path.display());
            *self.index_cache.lock().expect("index cache") = Some((snap.revision, Arc::new(fresh)));
        }
        Ok(())
    }

    fn resume_sessions(&self) -> Result<(), GatewayError> {
        let Some(dir) = &self.config.paths.sessions else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| GatewayError::io(dir, e))?;
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| GatewayError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = self.sessions.lock().expect("sessions");
        for path in paths {
            let session = crate::acquisition::load_session(&path)?;
            let log = SessionLog::open(&path)?;
            log::info!("resumed session {} ({} events)", session.id, session.log().len());
            sessions.insert(session.id.clone(), Arc::new(Mutex::new(SessionSlot { session, log: Some(log) })));
        }
        Ok(())
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn snapshot(&self) -> Snapshot {
        self.graph.snapshot()
    }

    pub fn revision(&self) -> u64 {
        self.graph.revision()
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        &*self.provider
    }

    pub fn registry(&self) -> &RoleRegistry {
        &self.registry
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// The entity index of `snap`, built once per revision.
    pub fn index(&self, snap: &Snapshot) -> Arc<InvertedIndex> {
        if let Some((rev, idx)) = &*self.index_cache.lock().expect("index cache") {
            if *rev == snap.revision {
                return idx.clone();
            }
        }
        let idx = Arc::new(InvertedIndex::from_graph(&snap.graph, self.config.tokenizer));
        let mut cache = self.index_cache.lock().expect("index cache");
        if cache.as_ref().is_none_or(|(r, _)| *r < snap.revision) {
            *cache = Some((snap.revision, idx.clone()));
        }
        idx
    }

    /// Runs `f` under the writer gate and saves the result before it is
    /// published.
    fn write<R>(&self, f: impl FnOnce(&mut KnowledgeGraph) -> Result<R, GatewayError>) -> Result<(R, u64), GatewayError> {
        self.graph.mutate(|kg| {
            let out = f(kg)?;
            if let Some(p) = &self.config.paths.graph {
                save_graph(kg, p)?;
            }
            Ok(out)
        })
    }

    fn linker<'a>(&'a self, index: &'a InvertedIndex) -> Linker<'a> {
        Linker::new(index, &*self.provider, &self.registry, self.config.link_config())
    }

    pub fn search(&self, query: &str, k: Option<usize>) -> Result<(Vec<SearchHit>, u64), GatewayError> {
        let snap = self.snapshot();
        let index = self.index(&snap);
        let hits = index.search(query, k.unwrap_or(self.config.search_k), self.config.max_edit)?;
        Ok((hits, snap.revision))
    }

    /// Links `record`; with `store` the record and its links are added to
    /// the graph.
    pub fn link(&self, record: &HeteroRecord, store: bool) -> Result<(IndexReport, u64), GatewayError> {
        if !store {
            let snap = self.snapshot();
            let index = self.index(&snap);
            let links = self.linker(&index).link_record(record)?;
            return Ok((IndexReport { datum: datum_iri(record), links, triples_added: 0 }, snap.revision));
        }
        self.write(|kg| {
            let index = self.index(&self.graph.snapshot());
            Ok(index_record(kg, record, &self.linker(&index))?)
        })
    }

    pub fn answer(&self, question: &str) -> Result<(Answer, u64), GatewayError> {
        let snap = self.snapshot();
        let index = self.index(&snap);
        let a = answer(&snap.graph, question, &self.templates, &self.linker(&index))?;
        Ok((a, snap.revision))
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<SessionSlot>>, GatewayError> {
        self.sessions.lock().expect("sessions").get(id).cloned().ok_or_else(|| GatewayError::UnknownSession(id.to_owned()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.lock().expect("sessions").keys().cloned().collect()
    }

    pub fn session(&self, id: &str) -> Result<(AnnotationSession, u64), GatewayError> {
        let slot = self.slot(id)?;
        let s = slot.lock().expect("session").session.clone();
        Ok((s, self.revision()))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<(AnnotationSession, u64), GatewayError> {
        let snap = self.snapshot();
        let from_graph = GazetteerRecognizer::from_graph("graph", GRAPH_MATCH_SCORE, &snap.graph);
        let linked = self.external_index.as_ref().map(|idx| {
            LinkerRecognizer::new("external", idx.clone(), self.provider.clone(), vocab::iri(vocab::CONCEPT))
        });
        let mut recognizers: Vec<&dyn Recognizer> = vec![&from_graph];
        if let Some(r) = &linked {
            recognizers.push(r);
        }
        let candidates = detect_candidates(&req.text, &recognizers)?;

        let mut sessions = self.sessions.lock().expect("sessions");
        let id = match req.session_id {
            Some(id) => {
                check_session_id(&id)?;
                if sessions.contains_key(&id) {
                    return Err(GatewayError::SessionExists(id));
                }
                id
            }
            None => {
                let base: String = slugify(&req.doc_id).chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
                let base = if base.trim_matches('_').is_empty() { "session".to_owned() } else { base };
                (1..).map(|n| format!("{base}-{n}")).find(|id| !sessions.contains_key(id)).expect("unbounded")
            }
        };
        let session =
            AnnotationSession::create(&id, req.doc_id, req.text, candidates, self.config.alpha, self.config.feedback, now_ms())?;
        let log = match &self.config.paths.sessions {
            Some(dir) => Some(SessionLog::create(dir.join(format!("{id}.jsonl")), &session)?),
            None => None,
        };
        sessions.insert(id, Arc::new(Mutex::new(SessionSlot { session: session.clone(), log })));
        Ok((session, snap.revision))
    }

    /// Applies `f` to a copy of the session; the copy replaces the session
    /// once its new events are on disk.
    fn update_session(
        &self,
        id: &str,
        f: impl FnOnce(&mut AnnotationSession) -> Result<(), GatewayError>,
    ) -> Result<(AnnotationSession, u64), GatewayError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("session");
        let mut next = slot.session.clone();
        f(&mut next)?;
        slot.append_new(&next)?;
        slot.session = next.clone();
        Ok((next, self.revision()))
    }

    pub fn label(&self, id: &str, req: LabelRequest) -> Result<(AnnotationSession, u64), GatewayError> {
        self.update_session(id, |s| {
            s.label(&req.candidate_id, req.verdict, &req.annotator, now_ms())?;
            Ok(())
        })
    }

    pub fn add_candidate(&self, id: &str, req: AddCandidateRequest) -> Result<(AnnotationSession, u64), GatewayError> {
        let class = req.class_iri.unwrap_or_else(|| vocab::iri(vocab::CONCEPT));
        self.update_session(id, |s| {
            s.add_candidate(req.start, req.end, class, &req.annotator, now_ms())?;
            Ok(())
        })
    }

    pub fn advance(&self, id: &str) -> Result<(AnnotationSession, u64), GatewayError> {
        let snap = self.snapshot();
        let sources = TripleSources {
            external: self.external.as_ref(),
            openie: self.openie.as_ref().map(|o| o as &dyn OpenIeExtractor),
            provider: &*self.provider,
            tau_map: self.config.tau_map,
        };
        self.update_session(id, |s| {
            s.advance(&snap.graph, &sources, now_ms())?;
            Ok(())
        })
    }

    /// Commits the session's current stage. The log entry is written before
    /// the new graph is published.
    pub fn commit(&self, id: &str) -> Result<(CommitReport, AnnotationSession, u64), GatewayError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("session");
        let mut next = slot.session.clone();
        let (report, revision) = self.write(|kg| {
            let (report, _) = next.commit(kg, now_ms())?;
            slot.append_new(&next)?;
            Ok(report)
        })?;
        slot.session = next.clone();
        Ok((report, next, revision))
    }

    pub fn expand(&self, alignments: &[ExternalAlignment], roles: bool) -> Result<(ExpansionReport, Option<RoleReport>, u64), GatewayError> {
        let ext = self.external.as_ref().ok_or_else(|| GatewayError::Config("no external graph configured".into()))?;
        let ((expansion, role_report), revision) = self.write(|kg| {
            let expansion = expand_concepts(kg, ext, alignments, self.config.theta, &*self.provider)?;
            let role_report = if roles { Some(consolidate_roles(kg, &self.registry)?) } else { None };
            Ok((expansion, role_report))
        })?;
        Ok((expansion, role_report, revision))
    }

    pub fn consolidate_roles(&self) -> Result<(RoleReport, u64), GatewayError> {
        self.write(|kg| Ok(consolidate_roles(kg, &self.registry)?))
    }

    /// Segments a textbook, assigns key topics, parses its exercises and
    /// stores all of it.
    pub fn ingest(
        &self,
        book_id: &str,
        markup: &str,
        catalog: &TopicCatalog,
        rules: &HeadingRules,
        exercises: &[RawExercise],
    ) -> Result<(IngestReport, u64), GatewayError> {
        let tree = segment_textbook(book_id, markup, rules, ValidationMode::Strict)?;
        let tfidf = book_tfidf(&tree, self.config.tokenizer);
        let section_topics = assign_key_topics(&tree, catalog, &tfidf, self.config.theta_topic, self.config.score_mode);
        let parser = ExerciseParser::new(Default::default())?;
        let mut parsed = Vec::new();
        let mut exercise_errors = Vec::new();
        for raw in exercises {
            match parser.parse(&raw.id, &raw.raw) {
                Ok(p) => parsed.push(p.exercise),
                Err(e) => exercise_errors.push(format!("{}: {e}", raw.id)),
            }
        }
        let ((entities_added, triples_added), revision) = self.write(|kg| {
            let book = store_book(kg, &tree, catalog, &section_topics)?;
            let gazetteer = concept_gazetteer(kg);
            for ex in &mut parsed {
                link_exercise_topics(ex, &gazetteer);
            }
            let ex = store_exercises(kg, &parsed)?;
            Ok((book.entities_added + ex.entities_added, book.triples_added + ex.triples_added))
        })?;
        let report = IngestReport {
            book_id: book_id.to_owned(),
            sections: tree.section_count(),
            section_topics,
            exercises: parsed.len(),
            exercise_errors,
            entities_added,
            triples_added,
        };
        Ok((report, revision))
    }

    /// Writes the current index to `path`; returns its entity count.
    pub fn build_index(&self, path: &Path) -> Result<(usize, u64), GatewayError> {
        let snap = self.snapshot();
        let index = self.index(&snap);
        let file = File::create(path).map_err(|e| GatewayError::io(path, e))?;
        let mut out = BufWriter::new(file);
        index.write_to(&mut out)?;
        out.flush().map_err(|e| GatewayError::io(path, e))?;
        Ok((index.len(), snap.revision))
    }

    /// The graph as N-Triples text plus its metadata sidecar.
    pub fn export(&self) -> Result<(String, serde_json::Value, u64), GatewayError> {
        let snap = self.snapshot();
        let (mut triples, mut meta) = (Vec::new(), Vec::new());
        export_graph(&snap.graph, &mut triples, &mut meta)?;
        let meta = serde_json::from_slice(&meta).map_err(|e| GatewayError::BadRequest(e.to_string()))?;
        Ok((String::from_utf8(triples).expect("N-Triples output is UTF-8"), meta, snap.revision))
    }

    pub fn save(&self, path: &Path) -> Result<u64, GatewayError> {
        let snap = self.snapshot();
        save_graph(&snap.graph, path)?;
        Ok(snap.revision)
    }
}
