use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, TokenizerConfig};
use super::vector::SparseVector;

/// Inverse document frequency variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfSmoothing {
    /// ln(N / df)
    #[default]
    None,
    /// ln((1 + N) / (1 + df)) + 1
    Smooth,
}

/// TF-IDF vector space fitted on a document collection. Columns follow the
/// lexicographic order of the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    tokenizer: TokenizerConfig,
    vocabulary: BTreeMap<String, usize>,
    doc_count: usize,
    doc_freq: Vec<usize>,
    smoothing: IdfSmoothing,
}

impl TfIdfModel {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>, tokenizer: TokenizerConfig) -> Self {
        Self::fit_with(docs, tokenizer, IdfSmoothing::None)
    }

    pub fn fit_with<'a>(docs: impl IntoIterator<Item = &'a str>, tokenizer: TokenizerConfig, smoothing: IdfSmoothing) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut doc_count = 0;
        for doc in docs {
            doc_count += 1;
            let distinct: BTreeSet<String> = tokenize(doc, &tokenizer).into_iter().collect();
            for token in distinct {
                *df.entry(token).or_default() += 1;
            }
        }
        let vocabulary = df.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let doc_freq = df.into_values().collect();
        TfIdfModel { tokenizer, vocabulary, doc_count, doc_freq, smoothing }
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn tokenizer(&self) -> &TokenizerConfig {
        &self.tokenizer
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn doc_freq(&self, token: &str) -> Option<usize> {
        self.column(token).map(|c| self.doc_freq[c])
    }

    pub fn idf_of_column(&self, column: usize) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq[column] as f64;
        match self.smoothing {
            IdfSmoothing::None => (n / df).ln(),
            IdfSmoothing::Smooth => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
        }
    }

    /// weight(t) = tf(t) · idf(t); out-of-vocabulary tokens are ignored.
    pub fn vector(&self, text: &str) -> SparseVector {
        let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
        for token in tokenize(text, &self.tokenizer) {
            if let Some(col) = self.column(&token) {
                *tf.entry(col).or_default() += 1;
            }
        }
        let entries = tf
            .into_iter()
            .map(|(col, count)| (col, count as f64 * self.idf_of_column(col)))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        SparseVector { dim: self.dim(), entries }
    }
}
