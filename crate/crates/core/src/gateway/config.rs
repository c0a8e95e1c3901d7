//! Engine configuration: one TOML file, then `KGF_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::acquisition::{FeedbackMode, DEFAULT_ALPHA, DEFAULT_TAU_MAP};
use crate::consolidation::DEFAULT_THETA;
use crate::edulink::{LinkConfig, DEFAULT_TAU_NIL};
use crate::ingest::{ScoreMode, DEFAULT_THETA_TOPIC};
use crate::textindex::{ProviderSpec, TokenizerConfig, TokenizerMode};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub graph: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub sessions: Option<PathBuf>,
    pub qa_templates: Option<PathBuf>,
    pub role_templates: Option<PathBuf>,
    pub external: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tokenizer: TokenizerConfig,
    pub alpha: f64,
    pub feedback: FeedbackMode,
    pub tau_map: f64,
    pub tau_nil: f64,
    pub theta: f64,
    pub theta_topic: f64,
    pub score_mode: ScoreMode,
    /// Candidates fetched per mention.
    pub search_k: usize,
    pub max_edit: usize,
    pub embedding: ProviderSpec,
    /// Open-extraction program and its arguments; unset disables that
    /// triple source.
    pub openie: Option<Vec<String>>,
    pub paths: Paths,
    pub listen: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tokenizer: TokenizerConfig::default(),
            alpha: DEFAULT_ALPHA,
            feedback: FeedbackMode::default(),
            tau_map: DEFAULT_TAU_MAP,
            tau_nil: DEFAULT_TAU_NIL,
            theta: DEFAULT_THETA,
            theta_topic: DEFAULT_THETA_TOPIC,
            score_mode: ScoreMode::default(),
            search_k: 10,
            max_edit: 1,
            embedding: ProviderSpec::default(),
            openie: None,
            paths: Paths::default(),
            listen: "127.0.0.1:8080".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, GatewayError> {
    value.trim().parse().map_err(|_| GatewayError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_tokenizer(value: &str) -> Result<TokenizerMode, GatewayError> {
    match value.trim() {
        "whitespace" => Ok(TokenizerMode::Whitespace),
        "character" => Ok(TokenizerMode::Character),
        other => match other.strip_prefix("char_ngram:") {
            Some(n) => Ok(TokenizerMode::CharNgram { n: parse_num("KGF_TOKENIZER", n)? }),
            None => Err(GatewayError::Config(format!("KGF_TOKENIZER: unknown mode {other:?}"))),
        },
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let cfg: Config = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given (defaults otherwise) and applies the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, GatewayError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| GatewayError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", p.display())))?
            }
            None => Config::default(),
        };
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `KGF_*` pairs; unrelated keys are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), GatewayError> {
        let mut remote_url = None;
        let mut remote_model = None;
        let mut dim = None;
        for (key, value) in vars {
            let path = || Some(PathBuf::from(&value));
            match key.as_str() {
                "KGF_ALPHA" => self.alpha = parse_num(&key, &value)?,
                "KGF_TAU_MAP" => self.tau_map = parse_num(&key, &value)?,
                "KGF_TAU_NIL" => self.tau_nil = parse_num(&key, &value)?,
                "KGF_THETA" => self.theta = parse_num(&key, &value)?,
                "KGF_THETA_TOPIC" => self.theta_topic = parse_num(&key, &value)?,
                "KGF_SEARCH_K" => self.search_k = parse_num(&key, &value)?,
                "KGF_MAX_EDIT" => self.max_edit = parse_num(&key, &value)?,
                "KGF_LISTEN" => self.listen = value.clone(),
                "KGF_TOKENIZER" => self.tokenizer.mode = parse_tokenizer(&value)?,
                "KGF_GRAPH" => self.paths.graph = path(),
                "KGF_ONTOLOGY" => self.paths.ontology = path(),
                "KGF_INDEX" => self.paths.index = path(),
                "KGF_SESSIONS" => self.paths.sessions = path(),
                "KGF_QA_TEMPLATES" => self.paths.qa_templates = path(),
                "KGF_ROLE_TEMPLATES" => self.paths.role_templates = path(),
                "KGF_EXTERNAL" => self.paths.external = path(),
                "KGF_EMBEDDING_URL" => remote_url = Some(value.clone()),
                "KGF_EMBEDDING_MODEL" => remote_model = Some(value.clone()),
                "KGF_EMBEDDING_DIM" => dim = Some(parse_num::<usize>(&key, &value)?),
                _ => {}
            }
        }
        match (remote_url, &mut self.embedding) {
            (Some(url), _) => {
                let dim = dim.ok_or_else(|| GatewayError::Config("KGF_EMBEDDING_URL needs KGF_EMBEDDING_DIM".into()))?;
                self.embedding = ProviderSpec::Remote { url, model: remote_model.unwrap_or_default(), dim };
            }
            (None, ProviderSpec::HashedTrigram { dim: d }) | (None, ProviderSpec::Remote { dim: d, .. }) => {
                if let Some(dim) = dim {
                    *d = dim;
                }
            }
            (None, ProviderSpec::Table { .. }) => {}
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(GatewayError::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        for (name, v) in [
            ("tau_map", self.tau_map),
            ("tau_nil", self.tau_nil),
            ("theta", self.theta),
            ("theta_topic", self.theta_topic),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GatewayError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        self.tokenizer.validate().map_err(|e| GatewayError::Config(e.to_string()))?;
        if self.openie.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(GatewayError::Config("openie needs a program".into()));
        }
        if self.search_k == 0 {
            return Err(GatewayError::Config("search_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn link_config(&self) -> LinkConfig {
        LinkConfig { k: self.search_k, max_edit: self.max_edit, tau_nil: self.tau_nil }
    }
}
