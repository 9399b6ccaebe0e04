//! Log-likelihood scoring of a target string under a context.
//!
//! Every attribution quantity reduces to `log p(target | context)`, summed
//! over target tokens in nats. Backends implement [`Scorer`]; the
//! [`CachingScorer`] wrapper adds request accounting and memoization.

mod cache;
mod http;
mod ngram;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheConfig, CachingScorer, ScorerStats};
pub use http::{extract_target_logprobs, HttpConfig, HttpScorer};
pub use ngram::{build_ngram, tokenize, NGramModel, NGramScorer, BOS, UNK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("score target is empty")]
    EmptyTarget,
    #[error("scoring backend unreachable after {attempts} attempts: {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("scoring backend returned HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedBackendResponse(String),
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid n-gram model: {0}")]
    InvalidModel(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("scoring failed for {what}: {source}")]
    At {
        what: String,
        #[source]
        source: Box<ScoreError>,
    },
}

impl ScoreError {
    /// Attaches a location (prefix index, sentence, mask) to the error.
    pub fn at(self, what: impl Into<String>) -> Self {
        ScoreError::At {
            what: what.into(),
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScoreRequest {
    context: String,
    target: String,
}

impl ScoreRequest {
    pub fn new(context: impl Into<String>, target: impl Into<String>) -> Result<Self, ScoreError> {
        let target = target.into();
        if target.trim().is_empty() {
            return Err(ScoreError::EmptyTarget);
        }
        Ok(Self {
            context: context.into(),
            target,
        })
    }

    pub fn context(&self) -> &str {
        &self.context
    }

    pub fn target(&self) -> &str {
        &self.target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProb {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbResult {
    /// Sum of target-token log-probabilities, in nats.
    pub total_logprob: f64,
    pub token_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_token: Option<Vec<TokenLogProb>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl LogProbResult {
    pub fn from_tokens(tokens: Vec<TokenLogProb>, warnings: Vec<String>) -> Self {
        let total_logprob = tokens.iter().map(|t| t.logprob).sum();
        Self {
            total_logprob,
            token_count: tokens.len(),
            per_token: Some(tokens),
            warnings,
        }
    }

    /// Per-token mean, for display only.
    pub fn mean_logprob(&self) -> f64 {
        self.total_logprob / self.token_count as f64
    }
}

/// A backend computing `log p(target | context)`.
pub trait Scorer: Send + Sync {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError>;

    /// Stable identity of the backend and model, used in cache keys and
    /// recorded in reports.
    fn identity(&self) -> String;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        (**self).score(req)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        (**self).score(req)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        (**self).score(req)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

/// Where the n-gram backend gets its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NGramSource {
    /// A serialized [`NGramModel`].
    ModelFile(PathBuf),
    /// A plain-text corpus, one sentence per line.
    Corpus {
        path: PathBuf,
        order: usize,
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Ngram(NGramSource),
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub backend: Backend,
    #[serde(default)]
    pub cache: CacheConfig,
}

impl ScorerConfig {
    /// Instantiates the configured backend behind a cache.
    pub fn build(&self) -> Result<CachingScorer<Box<dyn Scorer>>, ScoreError> {
        let backend: Box<dyn Scorer> = match &self.backend {
            Backend::Ngram(NGramSource::ModelFile(path)) => {
                let raw = std::fs::read(path).map_err(|e| {
                    ScoreError::InvalidModel(format!("cannot read {}: {e}", path.display()))
                })?;
                Box::new(NGramScorer::new(NGramModel::from_json(&raw)?))
            }
            Backend::Ngram(NGramSource::Corpus { path, order, alpha }) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    ScoreError::InvalidModel(format!("cannot read {}: {e}", path.display()))
                })?;
                let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
                Box::new(NGramScorer::new(build_ngram(&lines, *order, *alpha)?))
            }
            Backend::Http(cfg) => Box::new(HttpScorer::new(cfg.clone())?),
        };
        Ok(CachingScorer::new(backend, self.cache.clone()))
    }
}
