//! Tokenization, TF-IDF, the fuzzy entity index, dictionary matching, and
//! sentence-embedding providers.

pub mod embed;
mod gazetteer;
mod index;
mod levenshtein;
mod sentences;
mod tfidf;
mod tokenize;
mod vector;

pub use embed::{
    embed_sentence, fnv1a64, EmbedError, EmbeddingProvider, EmbeddingVector, HashedTrigramProvider, ProviderSpec,
    RemoteProvider, TableProvider, DEFAULT_EMBEDDING_DIM,
};
pub use gazetteer::{char_slice, is_cjk, Gazetteer, GazetteerMatch};
pub use index::{
    fuzzy_search, Field, IndexFileError, IndexedEntity, InvertedIndex, MatchKind, Posting, SearchError, SearchHit,
    INDEX_FORMAT_VERSION, INDEX_MAGIC,
};
pub use levenshtein::{bounded_levenshtein, levenshtein};
pub use sentences::{sentence_of, split_sentences};
pub use tfidf::{IdfSmoothing, TfIdfModel};
pub use tokenize::{normalize, tokenize, tokenize_normalized, TokenizerConfig, TokenizerError, TokenizerMode};
pub use vector::{cosine_dense, cosine_sparse, DimensionMismatch, SparseVector};
