//! Concept expansion from an aligned external graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ConsolidationError;
use crate::model::{
    humanize_local_name, vocab, Entity, ExternalKg, Iri, KnowledgeGraph, Method, Provenance, Term, Triple, ValidationMode,
};
use crate::textindex::{EmbeddingProvider, EmbeddingVector};

pub const DEFAULT_THETA: f64 = 0.8;

/// A local entity paired with its external counterpart. `weights` maps a
/// relation iri to w_n; relations not listed weigh 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalAlignment {
    pub local: Iri,
    pub external: Iri,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl ExternalAlignment {
    pub fn new(local: Iri, external: Iri) -> Self {
        ExternalAlignment { local, external, weights: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), ConsolidationError> {
        match self.weights.iter().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            Some((relation, &weight)) => Err(ConsolidationError::NegativeWeight { relation: relation.clone(), weight }),
            None => Ok(()),
        }
    }

    /// w_n for a neighbour reached through `predicates`: the largest listed
    /// weight among them, or 1.0 when none is listed.
    pub fn weight_for(&self, predicates: &[Iri]) -> f64 {
        predicates.iter().filter_map(|p| self.weights.get(p.as_str()).copied()).reduce(f64::max).unwrap_or(1.0)
    }
}

pub fn load_alignments(json: &str) -> Result<Vec<ExternalAlignment>, ConsolidationError> {
    let alignments: Vec<ExternalAlignment> = serde_json::from_str(json).map_err(|e| ConsolidationError::Json(e.to_string()))?;
    for a in &alignments {
        a.validate()?;
    }
    Ok(alignments)
}

/// Embeds each distinct text once.
struct EmbeddingCache<'a> {
    provider: &'a dyn EmbeddingProvider,
    cache: HashMap<String, EmbeddingVector>,
}

impl<'a> EmbeddingCache<'a> {
    fn new(provider: &'a dyn EmbeddingProvider) -> Self {
        EmbeddingCache { provider, cache: HashMap::new() }
    }

    fn sim(&mut self, a: &str, b: &str) -> Result<f64, ConsolidationError> {
        for text in [a, b] {
            if !self.cache.contains_key(text) {
                let v = self.provider.embed(text)?;
                self.cache.insert(text.to_owned(), v);
            }
        }
        Ok(self.cache[a].cosine(&self.cache[b])?)
    }
}

fn local_text(kg: &KnowledgeGraph, iri: &Iri) -> String {
    kg.entity(iri).map_or_else(|| humanize_local_name(iri), Entity::similarity_text)
}

/// score(c) = Sim(ê, c) · (1/|N(e)|) · Σ_{n ∈ N(e)} w_n · Sim(n, c), with
/// N(e) the local neighbours of the aligned entity.
pub fn expansion_score(
    alignment: &ExternalAlignment,
    candidate: &Iri,
    kg: &KnowledgeGraph,
    ext: &ExternalKg,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, ConsolidationError> {
    let mut cache = EmbeddingCache::new(provider);
    score_with(alignment, candidate, kg, ext, &mut cache)
}

fn score_with(
    alignment: &ExternalAlignment,
    candidate: &Iri,
    kg: &KnowledgeGraph,
    ext: &ExternalKg,
    cache: &mut EmbeddingCache<'_>,
) -> Result<f64, ConsolidationError> {
    let neighbours = kg.neighbours(&alignment.local);
    if neighbours.is_empty() {
        return Err(ConsolidationError::IsolatedEntity(alignment.local.clone()));
    }
    let c_text = ext.similarity_text(candidate);
    let lead = cache.sim(&ext.similarity_text(&alignment.external), &c_text)?;
    let mut sum = 0.0;
    for (n, predicates) in &neighbours {
        sum += alignment.weight_for(predicates) * cache.sim(&local_text(kg, n), &c_text)?;
    }
    Ok(lead * (sum / neighbours.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredExternal {
    pub alignment_local: Iri,
    pub external: Iri,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImportedConcept {
    pub local: Iri,
    pub external: Iri,
    pub score: f64,
    pub via: Iri,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionReport {
    pub imported: Vec<ImportedConcept>,
    pub triples_added: usize,
    /// Local entities skipped because they have no neighbours.
    pub isolated: Vec<Iri>,
}

/// External neighbours of every alignment with their scores, before any
/// threshold. Neighbours already aligned to a local entity, and the aligned
/// entity itself, are left out. Isolated local entities are listed apart.
pub fn score_expansion_candidates(
    kg: &KnowledgeGraph,
    ext: &ExternalKg,
    alignments: &[ExternalAlignment],
    provider: &dyn EmbeddingProvider,
) -> Result<(Vec<ScoredExternal>, Vec<Iri>), ConsolidationError> {
    let equivalent = vocab::iri(vocab::EXTERNAL_EQUIVALENT);
    let mut aligned: BTreeSet<Iri> =
        kg.with_predicate(&equivalent).filter_map(|t| t.object.as_iri().cloned()).collect();
    aligned.extend(alignments.iter().map(|a| a.external.clone()));
    let mut cache = EmbeddingCache::new(provider);
    let mut scored = Vec::new();
    let mut isolated = Vec::new();
    for alignment in alignments {
        alignment.validate()?;
        if kg.neighbours(&alignment.local).is_empty() {
            isolated.push(alignment.local.clone());
            continue;
        }
        let candidates: BTreeSet<&Iri> = ext.neighbours(&alignment.external).filter(|c| !aligned.contains(*c)).collect();
        for c in candidates {
            let score = score_with(alignment, c, kg, ext, &mut cache)?;
            scored.push(ScoredExternal { alignment_local: alignment.local.clone(), external: c.clone(), score });
        }
    }
    Ok((scored, isolated))
}

/// Imports every external neighbour scoring strictly above θ as a concept,
/// with an `externalEquivalent` triple to its external iri. All scores are
/// taken on the graph as it was before the first import. An external
/// entity reached from several alignments is imported once, at its first
/// qualifying score.
pub fn expand_concepts(
    kg: &mut KnowledgeGraph,
    ext: &ExternalKg,
    alignments: &[ExternalAlignment],
    theta: f64,
    provider: &dyn EmbeddingProvider,
) -> Result<ExpansionReport, ConsolidationError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(ConsolidationError::ThresholdOutOfRange(theta));
    }
    let (scored, isolated) = score_expansion_candidates(kg, ext, alignments, provider)?;
    for iri in &isolated {
        log::warn!("skipping expansion of {iri}: no neighbours in the local graph");
    }
    let mut report = ExpansionReport { imported: Vec::new(), triples_added: 0, isolated };
    let mut done = BTreeSet::new();
    let concept_class = vocab::iri(vocab::CONCEPT);
    for s in scored.into_iter().filter(|s| s.score > theta) {
        if !done.insert(s.external.clone()) {
            continue;
        }
        let label = ext.label(&s.external).map_or_else(|| humanize_local_name(&s.external), str::to_owned);
        let iri = kg.mint_iri("concept", &label);
        let entity = Entity::concept(iri.clone(), label, concept_class.clone())
            .with_description(ext.description(&s.external).unwrap_or(""));
        kg.add_entity(entity, ValidationMode::Strict)?;
        let provenance = Provenance::new(format!("expansion:{}", s.alignment_local), Method::Expansion, s.score.clamp(0.0, 1.0));
        let triple = Triple::new(iri.clone(), vocab::iri(vocab::EXTERNAL_EQUIVALENT), Term::iri(s.external.clone()), provenance);
        if kg.add_triple(triple, ValidationMode::Strict)? {
            report.triples_added += 1;
        }
        report.imported.push(ImportedConcept { local: iri, external: s.external, score: s.score, via: s.alignment_local });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ontology;
    use crate::textindex::TableProvider;

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    /// Local: e linked to n1, n2. External: ê with neighbours c1, c2.
    fn fixture(provider_rows: &[(&str, [f64; 2])]) -> (KnowledgeGraph, ExternalKg, TableProvider) {
        let mut kg = KnowledgeGraph::new(Ontology::builtin());
        let class = vocab::iri(vocab::CONCEPT);
        for (slug, label) in [("e", "E"), ("n1", "N1"), ("n2", "N2")] {
            kg.add_entity(Entity::concept(Iri::local("concept", slug), label, class.clone()), ValidationMode::Strict).unwrap();
        }
        for n in ["n1", "n2"] {
            let t = Triple::new(
                Iri::local("concept", "e"),
                vocab::iri(vocab::MENTIONS_CONCEPT),
                Term::iri(Iri::local("concept", n)),
                Provenance::new("t", Method::Human, 1.0),
            );
            kg.add_triple(t, ValidationMode::Strict).unwrap();
        }
        let ext = ExternalKg::parse(
            "<http://x/E> <http://www.w3.org/2000/01/rdf-schema#label> \"EH\" .\n\
             <http://x/E> <http://x/rel> <http://x/C1> .\n\
             <http://x/C2> <http://x/rel> <http://x/E> .\n\
             <http://x/C1> <http://www.w3.org/2000/01/rdf-schema#label> \"C1\" .\n\
             <http://x/C2> <http://www.w3.org/2000/01/rdf-schema#label> \"C2\" .\n"
                .as_bytes(),
        )
        .unwrap();
        let mut provider = TableProvider::new("toy", 2);
        for (text, v) in provider_rows {
            provider.insert(*text, v.to_vec()).unwrap();
        }
        (kg, ext, provider)
    }

    #[test]
    fn all_ones_scores_one_and_orthogonal_lead_scores_zero() {
        let rows = [("EH", [1.0, 0.0]), ("N1", [1.0, 0.0]), ("N2", [1.0, 0.0]), ("C1", [1.0, 0.0]), ("C2", [0.0, 1.0])];
        let (kg, ext, provider) = fixture(&rows);
        let a = ExternalAlignment::new(Iri::local("concept", "e"), iri("http://x/E"));
        assert!((expansion_score(&a, &iri("http://x/C1"), &kg, &ext, &provider).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(expansion_score(&a, &iri("http://x/C2"), &kg, &ext, &provider).unwrap(), 0.0);
    }

    #[test]
    fn matches_direct_formula_with_weights() {
        let rows = [("EH", [0.6, 0.8]), ("N1", [1.0, 0.0]), ("N2", [0.0, 1.0]), ("C1", [0.8, 0.6]), ("C2", [0.0, 1.0])];
        let (kg, ext, provider) = fixture(&rows);
        let mut a = ExternalAlignment::new(Iri::local("concept", "e"), iri("http://x/E"));
        a.weights.insert(vocab::MENTIONS_CONCEPT.into(), 0.5);
        let got = expansion_score(&a, &iri("http://x/C1"), &kg, &ext, &provider).unwrap();
        // Sim(ê,c1) = .6*.8 + .8*.6 = .96; Sim(n1,c1) = .8; Sim(n2,c1) = .6.
        let want = 0.96 * (0.5 * 0.8 + 0.5 * 0.6) / 2.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_strict_and_import_is_recorded() {
        let rows = [("EH", [1.0, 0.0]), ("N1", [1.0, 0.0]), ("N2", [1.0, 0.0]), ("C1", [1.0, 0.0]), ("C2", [0.0, 1.0])];
        let (mut kg, ext, provider) = fixture(&rows);
        let a = vec![ExternalAlignment::new(Iri::local("concept", "e"), iri("http://x/E"))];
        let unchanged = kg.clone();
        let none = expand_concepts(&mut kg.clone(), &ext, &a, 1.0, &provider).unwrap();
        assert!(none.imported.is_empty());
        let report = expand_concepts(&mut kg, &ext, &a, 0.8, &provider).unwrap();
        assert_eq!(report.imported.len(), 1);
        assert_eq!(report.imported[0].external, iri("http://x/C1"));
        assert_eq!(kg.entity_count(), unchanged.entity_count() + 1);
        let t = kg.with_predicate(&vocab::iri(vocab::EXTERNAL_EQUIVALENT)).next().unwrap();
        assert_eq!(t.provenance.method, Method::Expansion);
        // Already aligned externals are not offered again.
        let again = expand_concepts(&mut kg, &ext, &a, 0.8, &provider).unwrap();
        assert!(again.imported.is_empty());
    }

    #[test]
    fn isolated_entity_is_skipped() {
        let rows = [("EH", [1.0, 0.0])];
        let (mut kg, ext, provider) = fixture(&rows);
        let a = ExternalAlignment::new(Iri::local("concept", "n1_missing"), iri("http://x/E"));
        assert!(matches!(
            expansion_score(&a, &iri("http://x/C1"), &kg, &ext, &provider),
            Err(ConsolidationError::IsolatedEntity(_))
        ));
        let before = kg.clone();
        let report = expand_concepts(&mut kg, &ext, &[a], 0.8, &provider).unwrap();
        assert_eq!(report.isolated.len(), 1);
        assert_eq!(kg, before);
    }

    #[test]
    fn alignment_json_and_weight_validation() {
        let a = load_alignments(r#"[{"local":"edukg://concept/e","external":"http://x/E","weights":{"http://x/rel":2.0}}]"#).unwrap();
        assert_eq!(a[0].weight_for(&[iri("http://x/rel")]), 2.0);
        assert_eq!(a[0].weight_for(&[iri("http://x/other")]), 1.0);
        assert!(load_alignments(r#"[{"local":"edukg://concept/e","external":"http://x/E","weights":{"r":-1}}]"#).is_err());
    }
}
