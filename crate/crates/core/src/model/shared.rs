use std::sync::{Arc, Mutex, RwLock};

use super::graph::KnowledgeGraph;

/// Many readers or one writer over a graph. Readers receive immutable
/// snapshots; a writer mutates a private copy that is swapped in on success,
/// so a failed mutation leaves the published graph untouched.
#[derive(Debug)]
pub struct SharedGraph {
    published: RwLock<Snapshot>,
    writer: Mutex<()>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub graph: Arc<KnowledgeGraph>,
    pub revision: u64,
}

impl SharedGraph {
    pub fn new(graph: KnowledgeGraph) -> Self {
        SharedGraph {
            published: RwLock::new(Snapshot { graph: Arc::new(graph), revision: 0 }),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.published.read().expect("graph lock poisoned").clone()
    }

    pub fn revision(&self) -> u64 {
        self.published.read().expect("graph lock poisoned").revision
    }

    /// Runs `f` under the single-writer gate. On `Ok` the modified graph is
    /// published with the next revision number.
    pub fn mutate<R, E>(&self, f: impl FnOnce(&mut KnowledgeGraph) -> Result<R, E>) -> Result<(R, u64), E> {
        let _gate = self.writer.lock().expect("writer gate poisoned");
        let base = self.snapshot();
        let mut working = (*base.graph).clone();
        let out = f(&mut working)?;
        let mut published = self.published.write().expect("graph lock poisoned");
        published.graph = Arc::new(working);
        published.revision += 1;
        Ok((out, published.revision))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Entity, Ontology, ValidationMode, vocab};

    #[test]
    fn failed_mutation_leaves_graph_and_revision() {
        let shared = SharedGraph::new(KnowledgeGraph::new(Ontology::default()));
        let r: Result<((), u64), &str> = shared.mutate(|kg| {
            kg.add_entity(
                Entity::concept("edukg://concept/a".parse().unwrap(), "a", vocab::iri(vocab::CONCEPT)),
                ValidationMode::Strict,
            )
            .unwrap();
            Err("abort")
        });
        assert!(r.is_err());
        assert_eq!(shared.revision(), 0);
        assert_eq!(shared.snapshot().graph.entity_count(), 0);
    }

    #[test]
    fn snapshots_are_isolated_from_later_writes() {
        let shared = SharedGraph::new(KnowledgeGraph::new(Ontology::default()));
        let before = shared.snapshot();
        let (_, rev) = shared
            .mutate(|kg| {
                kg.add_entity(
                    Entity::concept("edukg://concept/a".parse().unwrap(), "a", vocab::iri(vocab::CONCEPT)),
                    ValidationMode::Strict,
                )
            })
            .unwrap();
        assert_eq!(rev, 1);
        assert_eq!(before.graph.entity_count(), 0);
        assert_eq!(shared.snapshot().graph.entity_count(), 1);
    }

    #[test]
    fn concurrent_writers_serialize() {
        let shared = Arc::new(SharedGraph::new(KnowledgeGraph::new(Ontology::default())));
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let shared = Arc::clone(&shared);
                std::thread::spawn(move || {
                    shared
                        .mutate(|kg| {
                            kg.add_entity(
                                Entity::concept(
                                    format!("edukg://concept/e{i}").parse().unwrap(),
                                    format!("e{i}"),
                                    vocab::iri(vocab::CONCEPT),
                                ),
                                ValidationMode::Strict,
                            )
                        })
                        .unwrap();
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let snap = shared.snapshot();
        assert_eq!(snap.graph.entity_count(), 8);
        assert_eq!(snap.revision, 8);
    }
}
