//! End-to-end attribution of one trajectory and the serializable report.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{contextcite_attribution, loo_attribution, ContextCiteConfig};
use crate::component::{prefix_supports, rank_components, temporal_gains, RankedComponent, Selection};
use crate::replay::{AttributionError, ReplayConfig};
use crate::scorer::{CachingScorer, LogProbResult, ScoreError, ScoreRequest, Scorer};
use crate::sentence::{rank_sentences, rank_values, score_component, HoldMode};
use crate::trajectory::{segment_sentences, Component, Trajectory, TrajectoryMeta};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Knobs for one attribution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributionConfig {
    pub replay: ReplayConfig,
    pub selection: Selection,
    pub hold_mode: HoldMode,
    /// Top sentences reported as evidence per selected component.
    pub evidence_size: usize,
    pub loo: bool,
    pub contextcite: Option<ContextCiteConfig>,
    /// Wall-clock timings make the report non-reproducible, so they are
    /// opt-in.
    pub record_timing: bool,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            replay: ReplayConfig::default(),
            selection: Selection::default(),
            hold_mode: HoldMode::default(),
            evidence_size: 5,
            loo: false,
            contextcite: None,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEntry {
    pub component_index: usize,
    pub sentence_index: usize,
    pub text: String,
    pub char_span: [usize; 2],
    pub drop: f64,
    pub hold: f64,
    pub phi: f64,
}

/// Sentence order of one selected component under one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRankingEntry {
    pub component_index: usize,
    pub ranking: Vec<usize>,
    pub evidence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooEntry {
    pub component_index: usize,
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextCiteEntry {
    pub component_index: usize,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub rmse: f64,
    pub sweeps: usize,
    pub num_samples: usize,
    pub target: String,
    pub ranking: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextCiteReport {
    pub weights: Vec<ContextCiteEntry>,
    pub config: ContextCiteConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loo: Option<Vec<LooEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextcite: Option<ContextCiteReport>,
}

/// Scorer requests per phase, counted before the cache, plus the number
/// that reached the backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub prefix: u64,
    pub sentence: u64,
    pub loo: u64,
    pub contextcite: u64,
    pub requests: u64,
    pub backend_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub tool_version: String,
    pub scoring_model: String,
    pub trajectory: TrajectoryMeta,
    pub target_action: String,
    pub components: Vec<Component>,
    pub psi: Vec<f64>,
    pub gains: Vec<f64>,
    pub component_ranking: Vec<RankedComponent>,
    pub selection: Selection,
    pub selected_components: Vec<usize>,
    pub hold_mode: HoldMode,
    pub sentence_scores: Vec<SentenceEntry>,
    pub sentence_rankings: Vec<SentenceRankingEntry>,
    pub baselines: BaselineReport,
    pub scorer_calls: CallCounts,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<BTreeMap<String, f64>>,
}

impl AttributionReport {
    pub fn sentences_of(&self, component_index: usize) -> impl Iterator<Item = &SentenceEntry> {
        self.sentence_scores
            .iter()
            .filter(move |s| s.component_index == component_index)
    }

    pub fn ranking_of(&self, component_index: usize) -> Option<&SentenceRankingEntry> {
        self.sentence_rankings
            .iter()
            .find(|r| r.component_index == component_index)
    }

    pub fn is_selected(&self, component_index: usize) -> bool {
        self.selected_components.contains(&component_index)
    }
}

/// Passes requests through while remembering every backend warning.
struct WarningSink<'a, S: ?Sized> {
    inner: &'a S,
    seen: Mutex<BTreeSet<String>>,
}

impl<S: Scorer + ?Sized> Scorer for WarningSink<'_, S> {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        let r = self.inner.score(req)?;
        if !r.warnings.is_empty() {
            self.seen.lock().unwrap().extend(r.warnings.iter().cloned());
        }
        Ok(r)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Runs component ranking, sentence scoring of the selected components and
/// any enabled baselines.
pub fn attribute<S: Scorer>(
    traj: &Trajectory,
    scorer: &CachingScorer<S>,
    cfg: &AttributionConfig,
) -> Result<AttributionReport, AttributionError> {
    let sink = WarningSink {
        inner: scorer,
        seen: Mutex::new(BTreeSet::new()),
    };
    let replay = &cfg.replay;
    let start = scorer.stats();
    let mut timing = BTreeMap::new();
    let mut last = start.requests;
    let mut phase = |name: &str, clock: Instant| {
        timing.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        let now = scorer.stats().requests;
        let used = now - last;
        last = now;
        used
    };

    let clock = Instant::now();
    let psi = prefix_supports(traj, &sink, replay)?;
    let gains = temporal_gains(&psi)?;
    let (ranking, selected) = rank_components(&gains, cfg.selection);
    let prefix_calls = phase("prefix", clock);

    let mut warnings = Vec::new();
    if selected.is_empty() {
        warnings.push("no component passed the selection rule; no sentences were scored".into());
    }

    let clock = Instant::now();
    let mut sentence_scores = Vec::new();
    let mut sentence_rankings = Vec::new();
    for &i in &selected {
        let scores = score_component(traj, i, &sink, replay, cfg.hold_mode)?;
        let sentences = segment_sentences(&traj.components()[i], &replay.segmenter);
        let ranked = rank_sentences(i, &scores);
        sentence_rankings.push(SentenceRankingEntry {
            component_index: i,
            ranking: ranked.indices(),
            evidence: ranked
                .evidence(cfg.evidence_size)
                .iter()
                .map(|s| s.sentence_index)
                .collect(),
        });
        sentence_scores.extend(scores.iter().zip(&sentences).map(|(s, sent)| SentenceEntry {
            component_index: i,
            sentence_index: s.sentence_index,
            text: sent.text.clone(),
            char_span: sent.char_span,
            drop: s.drop,
            hold: s.hold,
            phi: s.phi,
        }));
    }
    let sentence_calls = phase("sentence", clock);

    let clock = Instant::now();
    let mut baselines = BaselineReport::default();
    if cfg.loo {
        let entries = selected
            .iter()
            .map(|&i| {
                let scores = loo_attribution(traj, i, &sink, replay)?;
                Ok(LooEntry {
                    component_index: i,
                    ranking: rank_values(&scores),
                    scores,
                })
            })
            .collect::<Result<Vec<_>, AttributionError>>()?;
        baselines.loo = Some(entries);
    }
    let loo_calls = phase("loo", clock);

    let clock = Instant::now();
    if let Some(cc) = &cfg.contextcite {
        let weights = selected
            .iter()
            .map(|&i| {
                let fit = contextcite_attribution(traj, i, &sink, replay, cc)?;
                Ok(ContextCiteEntry {
                    component_index: i,
                    ranking: rank_values(&fit.weights),
                    weights: fit.weights,
                    intercept: fit.intercept,
                    rmse: fit.rmse,
                    sweeps: fit.sweeps,
                    num_samples: fit.num_samples,
                    target: fit.target,
                })
            })
            .collect::<Result<Vec<_>, AttributionError>>()?;
        baselines.contextcite = Some(ContextCiteReport { weights, config: *cc });
    }
    let contextcite_calls = phase("contextcite", clock);

    let end = scorer.stats();
    warnings.extend(sink.seen.into_inner().unwrap());
    Ok(AttributionReport {
        tool_version: TOOL_VERSION.to_string(),
        scoring_model: scorer.identity(),
        trajectory: traj.meta().clone(),
        target_action: traj.target_action().to_string(),
        components: traj.components().to_vec(),
        psi: psi.psi,
        gains: gains.gains,
        component_ranking: ranking.ranked,
        selection: cfg.selection,
        selected_components: selected,
        hold_mode: cfg.hold_mode,
        sentence_scores,
        sentence_rankings,
        baselines,
        scorer_calls: CallCounts {
            prefix: prefix_calls,
            sentence: sentence_calls,
            loo: loo_calls,
            contextcite: contextcite_calls,
            requests: end.requests - start.requests,
            backend_calls: end.backend_calls - start.backend_calls,
        },
        warnings,
        timing_ms: cfg.record_timing.then_some(timing),
    })
}
