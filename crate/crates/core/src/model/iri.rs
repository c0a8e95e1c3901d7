use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scheme prefix for identifiers minted by this engine.
pub const LOCAL_SCHEME: &str = "edukg://";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IriError {
    #[error("empty IRI")]
    Empty,
    #[error("IRI {iri:?} contains forbidden character {ch:?}")]
    ForbiddenChar { iri: String, ch: char },
    #[error("IRI {0:?} has no scheme")]
    MissingScheme(String),
}

/// An absolute identifier. Locally minted ones follow `edukg://{kind}/{slug}`;
/// external identifiers are carried verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, IriError> {
        let value = value.into();
        if value.is_empty() {
            return Err(IriError::Empty);
        }
        if let Some(ch) = value.chars().find(|c| is_forbidden(*c)) {
            return Err(IriError::ForbiddenChar { iri: value, ch });
        }
        if !value.contains(':') {
            return Err(IriError::MissingScheme(value));
        }
        Ok(Iri(value))
    }

    /// Mints a local identifier; `slug` is sanitized with [`slugify`].
    pub fn local(kind: &str, slug: &str) -> Self {
        Iri(format!("{LOCAL_SCHEME}{}/{}", slugify(kind), slugify(slug)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_local(&self) -> bool {
        self.0.starts_with(LOCAL_SCHEME)
    }

    pub(crate) fn from_static(value: &'static str) -> Self {
        Iri(value.to_owned())
    }
}

fn is_forbidden(c: char) -> bool {
    c.is_whitespace() || c.is_control() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Iri {
    type Err = IriError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Iri::new(s)
    }
}

impl TryFrom<String> for Iri {
    type Error = IriError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> String {
        iri.0
    }
}

impl AsRef<str> for Iri {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Lowercases, keeps letters and digits of any script, and collapses every
/// other run of characters into a single `_`.
pub fn slugify(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_sep = false;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(c.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    if out.is_empty() {
        out.push('_');
    }
    out
}
