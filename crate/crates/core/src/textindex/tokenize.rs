use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TokenizerMode {
    /// One token per extended grapheme cluster, whitespace skipped.
    Character,
    /// Overlapping grapheme n-grams within each whitespace-delimited chunk.
    CharNgram { n: usize },
    /// Whitespace-delimited words with surrounding punctuation trimmed.
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizerConfig {
    #[serde(flatten)]
    pub mode: TokenizerMode,
    #[serde(default = "default_true")]
    pub lowercase: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizerError {
    #[error("char n-gram size must be at least 2, got {0}")]
    NgramTooSmall(usize),
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { mode: TokenizerMode::Whitespace, lowercase: true }
    }
}

impl TokenizerConfig {
    pub fn new(mode: TokenizerMode, lowercase: bool) -> Result<Self, TokenizerError> {
        let cfg = TokenizerConfig { mode, lowercase };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn character() -> Self {
        TokenizerConfig { mode: TokenizerMode::Character, lowercase: true }
    }

    pub fn validate(&self) -> Result<(), TokenizerError> {
        match self.mode {
            TokenizerMode::CharNgram { n } if n < 2 => Err(TokenizerError::NgramTooSmall(n)),
            _ => Ok(()),
        }
    }

    pub fn normalize(&self, text: &str) -> String {
        normalize(text, self.lowercase)
    }
}

/// NFC, then lowercase when requested.
pub fn normalize(text: &str, lowercase: bool) -> String {
    let nfc: String = text.nfc().collect();
    if lowercase {
        nfc.to_lowercase()
    } else {
        nfc
    }
}

pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let normalized = cfg.normalize(text);
    tokenize_normalized(&normalized, cfg).into_iter().map(|(_, t)| t).collect()
}

/// Tokens of already-normalized text with their byte offsets.
pub fn tokenize_normalized(text: &str, cfg: &TokenizerConfig) -> Vec<(usize, String)> {
    match cfg.mode {
        TokenizerMode::Character => text
            .grapheme_indices(true)
            .filter(|(_, g)| !g.chars().all(char::is_whitespace))
            .map(|(i, g)| (i, g.to_owned()))
            .collect(),
        TokenizerMode::Whitespace => words(text).map(|(i, w)| (i, w.to_owned())).collect(),
        TokenizerMode::CharNgram { n } => {
            let mut out = Vec::new();
            for (base, word) in words(text) {
                let graphemes: Vec<(usize, &str)> = word.grapheme_indices(true).collect();
                if graphemes.len() <= n {
                    out.push((base, word.to_owned()));
                    continue;
                }
                for start in 0..=graphemes.len() - n {
                    let from = graphemes[start].0;
                    let to = graphemes.get(start + n).map_or(word.len(), |g| g.0);
                    out.push((base + from, word[from..to].to_owned()));
                }
            }
            out
        }
    }
}

/// Whitespace-split words with leading/trailing non-alphanumerics removed.
fn words(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace().filter_map(move |raw| {
        let offset = raw.as_ptr() as usize - text.as_ptr() as usize;
        let trimmed_start = raw.trim_start_matches(|c: char| !c.is_alphanumeric());
        let lead = raw.len() - trimmed_start.len();
        let word = trimmed_start.trim_end_matches(|c: char| !c.is_alphanumeric());
        (!word.is_empty()).then_some((offset + lead, word))
    })
}
