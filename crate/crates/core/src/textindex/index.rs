use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::levenshtein::bounded_levenshtein;
use super::tokenize::{tokenize_normalized, TokenizerConfig, TokenizerMode};
use crate::model::{EntityKind, Iri, KnowledgeGraph, RoleType};

pub const INDEX_MAGIC: &[u8; 6] = b"KGFIDX";
pub const INDEX_FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedEntity {
    pub iri: Iri,
    pub label: String,
    pub aliases: Vec<String>,
    pub description: String,
    /// Set for rhetorical-role entities.
    pub role: Option<RoleType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Label,
    Alias,
    Description,
}

/// Tier of a search hit; declaration order is rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Prefix,
    WithinEdit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub iri: Iri,
    pub match_kind: MatchKind,
    pub field: Field,
    /// Fraction of distinct query tokens present in the matched field.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub entity: u32,
    pub field: Field,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("empty query")]
    EmptyQuery,
}

#[derive(Debug, Error)]
pub enum IndexFileError {
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u8),
    #[error("decoding index: {0}")]
    Decode(#[from] bincode::Error),
    #[error("index io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy)]
struct FieldRef {
    entity: u32,
    slot: u16,
}

/// Immutable entity index over label, alias, and description fields.
/// Entities are kept sorted by IRI, so postings are too.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    tokenizer: TokenizerConfig,
    entities: Vec<IndexedEntity>,
    postings: BTreeMap<String, Vec<Posting>>,
    snapshot_id: u64,
    // Derived on build and on load.
    values: Vec<Vec<(Field, String)>>,
    exact: HashMap<String, Vec<FieldRef>>,
    by_length: BTreeMap<usize, Vec<FieldRef>>,
}

#[derive(Serialize, Deserialize)]
struct PersistedTokenizer {
    mode: u8,
    n: u32,
    lowercase: bool,
}

impl From<&TokenizerConfig> for PersistedTokenizer {
    fn from(cfg: &TokenizerConfig) -> Self {
        let (mode, n) = match cfg.mode {
            TokenizerMode::Character => (0, 0),
            TokenizerMode::CharNgram { n } => (1, n as u32),
            TokenizerMode::Whitespace => (2, 0),
        };
        PersistedTokenizer { mode, n, lowercase: cfg.lowercase }
    }
}

impl PersistedTokenizer {
    fn into_config(self) -> Result<TokenizerConfig, IndexFileError> {
        let mode = match self.mode {
            0 => TokenizerMode::Character,
            1 => TokenizerMode::CharNgram { n: self.n as usize },
            2 => TokenizerMode::Whitespace,
            other => return Err(IndexFileError::Decode(Box::new(bincode::ErrorKind::Custom(format!("tokenizer mode {other}"))))),
        };
        Ok(TokenizerConfig { mode, lowercase: self.lowercase })
    }
}

#[derive(Serialize, Deserialize)]
struct PersistedIndex {
    tokenizer: PersistedTokenizer,
    entities: Vec<IndexedEntity>,
    postings: BTreeMap<String, Vec<Posting>>,
    snapshot_id: u64,
}

impl InvertedIndex {
    pub fn build(entities: impl IntoIterator<Item = IndexedEntity>, tokenizer: TokenizerConfig) -> Self {
        let mut entities: Vec<IndexedEntity> = entities.into_iter().collect();
        entities.sort_by(|a, b| a.iri.cmp(&b.iri));
        entities.dedup_by(|a, b| a.iri == b.iri);
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (idx, entity) in entities.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for (field, value) in raw_fields(entity) {
                let norm = tokenizer.normalize(value);
                for (_, token) in tokenize_normalized(&norm, &tokenizer) {
                    if seen.insert((token.clone(), field)) {
                        postings.entry(token).or_default().push(Posting { entity: idx as u32, field });
                    }
                }
            }
        }
        let snapshot_id = snapshot_hash(&tokenizer, &entities);
        let mut index = InvertedIndex {
            tokenizer,
            entities,
            postings,
            snapshot_id,
            values: Vec::new(),
            exact: HashMap::new(),
            by_length: BTreeMap::new(),
        };
        index.derive();
        index
    }

    /// Indexes the concepts and rhetorical roles of `kg`. Resources
    /// (sections, exercises) and stored records are link sources, not
    /// targets, and are left out.
    pub fn from_graph(kg: &KnowledgeGraph, tokenizer: TokenizerConfig) -> Self {
        let entities = kg
            .entities()
            .filter(|e| matches!(e.kind, EntityKind::Concept | EntityKind::RhetoricalRole { .. }))
            .map(|e| IndexedEntity {
                iri: e.iri.clone(),
                label: e.label.clone(),
                aliases: e.aliases.iter().cloned().collect(),
                description: e.description.clone(),
                role: e.role_type(),
            });
        Self::build(entities, tokenizer)
    }

    fn derive(&mut self) {
        self.values = self
            .entities
            .iter()
            .map(|e| raw_fields(e).map(|(f, v)| (f, self.tokenizer.normalize(v).trim().to_owned())).collect())
            .collect();
        self.exact.clear();
        self.by_length.clear();
        for (entity, values) in self.values.iter().enumerate() {
            for (slot, (_, value)) in values.iter().enumerate() {
                if value.is_empty() {
                    continue;
                }
                let r = FieldRef { entity: entity as u32, slot: slot as u16 };
                self.exact.entry(value.clone()).or_default().push(r);
                self.by_length.entry(value.chars().count()).or_default().push(r);
            }
        }
    }

    pub fn tokenizer(&self) -> &TokenizerConfig {
        &self.tokenizer
    }

    pub fn snapshot_id(&self) -> u64 {
        self.snapshot_id
    }

    pub fn entities(&self) -> &[IndexedEntity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, iri: &Iri) -> Option<&IndexedEntity> {
        self.entities.binary_search_by(|e| e.iri.cmp(iri)).ok().map(|i| &self.entities[i])
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }

    /// Ranked fuzzy lookup. Tiers: exact field match, then query occurring at
    /// a token boundary of a field, then whole-field Levenshtein distance
    /// ≤ `max_edit`. Within a tier: token overlap descending, then IRI.
    pub fn search(&self, query: &str, k: usize, max_edit: usize) -> Result<Vec<SearchHit>, SearchError> {
        let q = self.tokenizer.normalize(query).trim().to_owned();
        if q.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        let q_tokens: Vec<(usize, String)> = tokenize_normalized(&q, &self.tokenizer);
        let q_set: BTreeSet<&str> = q_tokens.iter().map(|(_, t)| t.as_str()).collect();

        let mut best: HashMap<u32, (MatchKind, f64, Field)> = HashMap::new();
        let mut consider = |r: FieldRef, kind: MatchKind, this: &Self| {
            let (field, value) = &this.values[r.entity as usize][r.slot as usize];
            let overlap = this.overlap(&q_set, value);
            let entry = best.entry(r.entity).or_insert((kind, overlap, *field));
            if (kind, std::cmp::Reverse(OrdF64(overlap))) < (entry.0, std::cmp::Reverse(OrdF64(entry.1))) {
                *entry = (kind, overlap, *field);
            }
        };

        if let Some(refs) = self.exact.get(&q) {
            for &r in refs {
                consider(r, MatchKind::Exact, self);
            }
        }

        if let Some((_, first)) = q_tokens.first() {
            let mut checked = BTreeSet::new();
            for (token, postings) in self.postings.range(first.clone()..) {
                if !token.starts_with(first.as_str()) {
                    break;
                }
                for p in postings {
                    if !checked.insert((p.entity, p.field)) {
                        continue;
                    }
                    for (slot, (field, value)) in self.values[p.entity as usize].iter().enumerate() {
                        if *field == p.field && self.occurs_at_boundary(value, &q) {
                            consider(FieldRef { entity: p.entity, slot: slot as u16 }, MatchKind::Prefix, self);
                        }
                    }
                }
            }
        }

        if max_edit > 0 {
            let len = q.chars().count();
            for (_, refs) in self.by_length.range(len.saturating_sub(max_edit)..=len + max_edit) {
                for &r in refs {
                    let value = &self.values[r.entity as usize][r.slot as usize].1;
                    if bounded_levenshtein(&q, value, max_edit).is_some() {
                        consider(r, MatchKind::WithinEdit, self);
                    }
                }
            }
        }

        let mut hits: Vec<SearchHit> = best
            .into_iter()
            .map(|(entity, (match_kind, score, field))| SearchHit {
                iri: self.entities[entity as usize].iri.clone(),
                match_kind,
                field,
                score,
            })
            .collect();
        hits.sort_by(|a, b| {
            a.match_kind
                .cmp(&b.match_kind)
                .then(b.score.total_cmp(&a.score))
                .then_with(|| a.iri.cmp(&b.iri))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// True when `query` starts at offset 0 or at a token start of `value`.
    pub fn occurs_at_boundary(&self, value: &str, query: &str) -> bool {
        value.starts_with(query)
            || tokenize_normalized(value, &self.tokenizer)
                .iter()
                .any(|(offset, _)| value[*offset..].starts_with(query))
    }

    fn overlap(&self, q_set: &BTreeSet<&str>, value: &str) -> f64 {
        if q_set.is_empty() {
            return 0.0;
        }
        let f_set: BTreeSet<String> = tokenize_normalized(value, &self.tokenizer).into_iter().map(|(_, t)| t).collect();
        let shared = q_set.iter().filter(|t| f_set.contains(**t)).count();
        shared as f64 / q_set.len() as f64
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), IndexFileError> {
        out.write_all(INDEX_MAGIC)?;
        out.write_all(&[INDEX_FORMAT_VERSION])?;
        let persisted = PersistedIndex {
            tokenizer: (&self.tokenizer).into(),
            entities: self.entities.clone(),
            postings: self.postings.clone(),
            snapshot_id: self.snapshot_id,
        };
        bincode::serialize_into(&mut out, &persisted)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, IndexFileError> {
        let mut magic = [0u8; 6];
        input.read_exact(&mut magic).map_err(|_| IndexFileError::BadMagic)?;
        if &magic != INDEX_MAGIC {
            return Err(IndexFileError::BadMagic);
        }
        let mut version = [0u8; 1];
        input.read_exact(&mut version)?;
        if version[0] != INDEX_FORMAT_VERSION {
            return Err(IndexFileError::UnsupportedVersion(version[0]));
        }
        let persisted: PersistedIndex = bincode::deserialize_from(input)?;
        let mut index = InvertedIndex {
            tokenizer: persisted.tokenizer.into_config()?,
            entities: persisted.entities,
            postings: persisted.postings,
            snapshot_id: persisted.snapshot_id,
            values: Vec::new(),
            exact: HashMap::new(),
            by_length: BTreeMap::new(),
        };
        index.derive();
        Ok(index)
    }
}

pub fn fuzzy_search(index: &InvertedIndex, query: &str, k: usize, max_edit: usize) -> Result<Vec<SearchHit>, SearchError> {
    index.search(query, k, max_edit)
}

fn raw_fields(entity: &IndexedEntity) -> impl Iterator<Item = (Field, &str)> {
    std::iter::once((Field::Label, entity.label.as_str()))
        .chain(entity.aliases.iter().map(|a| (Field::Alias, a.as_str())))
        .chain(std::iter::once((Field::Description, entity.description.as_str())))
}

fn snapshot_hash(tokenizer: &TokenizerConfig, entities: &[IndexedEntity]) -> u64 {
    let bytes = bincode::serialize(&(PersistedTokenizer::from(tokenizer), entities)).expect("in-memory serialization");
    super::embed::fnv1a64(&bytes)
}

/// f64 under `total_cmp`.
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(iri: &str, label: &str, aliases: &[&str], description: &str) -> IndexedEntity {
        IndexedEntity {
            iri: iri.parse().unwrap(),
            label: label.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
            description: description.into(),
            role: None,
        }
    }

    fn sample() -> InvertedIndex {
        InvertedIndex::build(
            vec![
                entity("edukg://concept/capacitance", "capacitance", &["electric capacitance"], "ratio of charge to potential, a physical quantity"),
                entity("edukg://concept/capacitor", "capacitor", &[], "electronic component storing charge"),
                entity("edukg://concept/cap", "cap", &[], "a covering"),
                entity("edukg://concept/french_revolution", "French Revolution", &[], "revolution in France beginning in 1789"),
            ],
            TokenizerConfig::default(),
        )
    }

    #[test]
    fn exact_label_ranks_first() {
        let idx = sample();
        let hits = idx.search("Capacitance", 10, 1).unwrap();
        assert_eq!(hits[0].iri.as_str(), "edukg://concept/capacitance");
        assert_eq!(hits[0].match_kind, MatchKind::Exact);
    }

    #[test]
    fn prefix_tier_and_description_occurrence() {
        let idx = sample();
        let hits = idx.search("capac", 10, 0).unwrap();
        let iris: Vec<_> = hits.iter().map(|h| h.iri.as_str()).collect();
        assert_eq!(iris, vec!["edukg://concept/capacitance", "edukg://concept/capacitor"]);
        assert!(hits.iter().all(|h| h.match_kind == MatchKind::Prefix));
        let hits = idx.search("physical quantity", 10, 0).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].field, Field::Description);
    }

    #[test]
    fn edit_distance_tier() {
        let idx = sample();
        let hits = idx.search("capacitanse", 10, 1).unwrap();
        assert_eq!(hits[0].iri.as_str(), "edukg://concept/capacitance");
        assert_eq!(hits[0].match_kind, MatchKind::WithinEdit);
        assert!(idx.search("capacitanse", 10, 0).unwrap().is_empty());
    }

    #[test]
    fn limit_and_empty_query() {
        let idx = sample();
        assert_eq!(idx.search("cap", 1, 1).unwrap().len(), 1);
        assert!(matches!(idx.search("   ", 5, 1), Err(SearchError::EmptyQuery)));
    }

    #[test]
    fn binary_round_trip_preserves_results() {
        let idx = sample();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..6], INDEX_MAGIC);
        assert_eq!(buf[6], INDEX_FORMAT_VERSION);
        let back = InvertedIndex::read_from(&buf[..]).unwrap();
        assert_eq!(back.snapshot_id(), idx.snapshot_id());
        assert_eq!(back.search("capac", 10, 1).unwrap(), idx.search("capac", 10, 1).unwrap());
        let mut bad = buf.clone();
        bad[6] = 9;
        assert!(matches!(InvertedIndex::read_from(&bad[..]), Err(IndexFileError::UnsupportedVersion(9))));
        assert!(matches!(InvertedIndex::read_from(&b"nope"[..]), Err(IndexFileError::BadMagic)));
    }

    #[test]
    fn postings_sorted_by_iri() {
        let idx = sample();
        for postings in idx.postings.values() {
            let iris: Vec<_> = postings.iter().map(|p| &idx.entities[p.entity as usize].iri).collect();
            assert!(iris.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn character_tokenizer_matches_cjk_substrings() {
        let idx = InvertedIndex::build(
            vec![entity("edukg://concept/电容", "电容", &[], "表征电容器容纳电荷本领的物理量")],
            TokenizerConfig::character(),
        );
        assert_eq!(idx.search("电荷", 5, 0).unwrap().len(), 1);
    }
}
