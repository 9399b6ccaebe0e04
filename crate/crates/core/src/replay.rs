//! Shared settings and helpers for replaying a trajectory through a scorer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::LassoError;
use crate::scorer::{ScoreError, ScoreRequest, Scorer};
use crate::trajectory::{RenderError, RenderTemplate, SegmenterConfig};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error("prefix support vector needs at least 2 entries, got {0}")]
    TooShort(usize),
    #[error("non-finite attribution input: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    pub template: RenderTemplate,
    pub segmenter: SegmenterConfig,
    /// Upper bound on concurrent scorer calls.
    pub max_in_flight: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            template: RenderTemplate::default(),
            segmenter: SegmenterConfig::default(),
            max_in_flight: 4,
        }
    }
}

/// `log p(target | context)` as a bare number.
pub(crate) fn logprob<S: Scorer + ?Sized>(
    scorer: &S,
    context: &str,
    target: &str,
) -> Result<f64, ScoreError> {
    Ok(scorer.score(&ScoreRequest::new(context, target)?)?.total_logprob)
}
