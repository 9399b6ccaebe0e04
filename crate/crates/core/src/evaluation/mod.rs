//! Hit@k evaluation against ground-truth sentence sets.

mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{
    check_trigger_uniqueness, generate_synthetic_case, verify_planted_case, SynthCase, SynthConfig,
    SyntheticSuite,
};

use crate::report::AttributionReport;
use crate::trajectory::{segment_sentences, SegmenterConfig, Trajectory};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("ground truth {path} violates schema: {message}")]
    Schema { path: String, message: String },
    #[error("ground truth for case {case_id:?} has no sentence indices")]
    EmptyGroundTruth { case_id: String },
    #[error("ground truth for case {case_id:?} references {what} out of range")]
    DanglingIndex { case_id: String, what: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("cannot compute Hit@k on an empty ranking")]
    EmptyRanking,
    #[error("no cases to aggregate")]
    ZeroCases,
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("invalid synthetic configuration: {0}")]
    SynthConfig(String),
    #[error("could not generate a sound case {case_index} after {attempts} attempts")]
    SynthExhausted { case_index: usize, attempts: usize },
}

/// Planted or annotated driver sentences of one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub case_id: String,
    pub component_index: usize,
    pub sentence_indices: Vec<usize>,
}

impl GroundTruth {
    pub fn sentence_set(&self) -> BTreeSet<usize> {
        self.sentence_indices.iter().copied().collect()
    }

    /// Checks the indices against the segmented trajectory.
    pub fn validate(&self, traj: &Trajectory, seg: &SegmenterConfig) -> Result<(), EvalError> {
        if self.sentence_indices.is_empty() {
            return Err(EvalError::EmptyGroundTruth {
                case_id: self.case_id.clone(),
            });
        }
        let component = traj.component(self.component_index).ok_or_else(|| EvalError::DanglingIndex {
            case_id: self.case_id.clone(),
            what: format!("component {}", self.component_index),
        })?;
        let count = segment_sentences(component, seg).len();
        if let Some(&bad) = self.sentence_indices.iter().find(|&&j| j >= count) {
            return Err(EvalError::DanglingIndex {
                case_id: self.case_id.clone(),
                what: format!("sentence {bad} of component {} ({count} sentences)", self.component_index),
            });
        }
        Ok(())
    }
}

/// Reads a ground-truth file and validates it against its trajectory.
pub fn load_ground_truth(
    path: &Path,
    traj: &Trajectory,
    seg: &SegmenterConfig,
) -> Result<GroundTruth, EvalError> {
    let raw = std::fs::read(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let gt: GroundTruth = serde_json::from_slice(&raw).map_err(|e| EvalError::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    gt.validate(traj, seg)?;
    Ok(gt)
}

/// 1 when any of the top `k` ranked indices is in `truth`, else 0.
pub fn hit_at_k(ranked: &[usize], truth: &BTreeSet<usize>, k: usize) -> Result<u8, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if ranked.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    Ok(u8::from(ranked.iter().take(k).any(|j| truth.contains(j))))
}

/// Column label used in reports, e.g. `hit@3`.
pub fn hit_label(k: usize) -> String {
    format!("hit@{k}")
}

/// Hit values of one method on one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseHits {
    pub case_id: String,
    pub method: String,
    /// Keyed by `hit@k`; fractional when a case has several annotated
    /// components.
    pub hits: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub methods: BTreeMap<String, BTreeMap<String, f64>>,
    pub num_cases: usize,
    pub per_case: Vec<CaseHits>,
}

/// Mean hit value per method and k over all cases.
pub fn aggregate(per_case: Vec<CaseHits>) -> Result<EvalResult, EvalError> {
    let cases: BTreeSet<&str> = per_case.iter().map(|c| c.case_id.as_str()).collect();
    if cases.is_empty() {
        return Err(EvalError::ZeroCases);
    }
    let mut sums: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for record in &per_case {
        let by_k = sums.entry(record.method.clone()).or_default();
        for (label, &v) in &record.hits {
            let slot = by_k.entry(label.clone()).or_insert((0.0, 0));
            slot.0 += v;
            slot.1 += 1;
        }
    }
    let methods = sums
        .into_iter()
        .map(|(m, by_k)| {
            let means = by_k
                .into_iter()
                .map(|(label, (sum, n))| (label, sum / n as f64))
                .collect();
            (m, means)
        })
        .collect();
    Ok(EvalResult {
        methods,
        num_cases: cases.len(),
        per_case,
    })
}

/// Sentence-level ranking methods under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DropHold,
    Loo,
    ContextCite,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DropHold, Method::Loo, Method::ContextCite];

    pub fn name(self) -> &'static str {
        match self {
            Method::DropHold => "drop_hold",
            Method::Loo => "loo",
            Method::ContextCite => "contextcite",
        }
    }

    pub fn parse(name: &str) -> Result<Self, EvalError> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name.trim())
            .ok_or_else(|| EvalError::UnknownMethod(name.to_string()))
    }
}

/// Pseudo-method under which component-level hits are recorded.
pub const COMPONENT_LEVEL: &str = "component";

/// Sentence ranking of `method` for one component, if the report has one.
fn method_ranking(report: &AttributionReport, method: Method, component: usize) -> Option<Vec<usize>> {
    match method {
        Method::DropHold => report.ranking_of(component).map(|r| r.ranking.clone()),
        Method::Loo => report
            .baselines
            .loo
            .as_ref()?
            .iter()
            .find(|e| e.component_index == component)
            .map(|e| e.ranking.clone()),
        Method::ContextCite => report
            .baselines
            .contextcite
            .as_ref()?
            .weights
            .iter()
            .find(|e| e.component_index == component)
            .map(|e| e.ranking.clone()),
    }
}

/// Hit values of one case for each method plus the component level.
///
/// A ground-truth entry whose component was not selected scores 0 at the
/// sentence level. Several entries for one case are averaged.
pub fn case_hits(
    report: &AttributionReport,
    truths: &[GroundTruth],
    methods: &[Method],
    ks: &[usize],
) -> Result<Vec<CaseHits>, EvalError> {
    let Some(first) = truths.first() else {
        return Err(EvalError::ZeroCases);
    };
    if ks.contains(&0) {
        return Err(EvalError::InvalidK);
    }
    let mean = |f: &dyn Fn(&GroundTruth, usize) -> Result<u8, EvalError>| -> Result<BTreeMap<String, f64>, EvalError> {
        ks.iter()
            .map(|&k| {
                let total = truths.iter().map(|gt| f(gt, k).map(f64::from)).sum::<Result<f64, _>>()?;
                Ok((hit_label(k), total / truths.len() as f64))
            })
            .collect()
    };

    let component_ranking: Vec<usize> = report.component_ranking.iter().map(|r| r.component_index).collect();
    let mut out = vec![CaseHits {
        case_id: first.case_id.clone(),
        method: COMPONENT_LEVEL.to_string(),
        hits: mean(&|gt, k| hit_at_k(&component_ranking, &[gt.component_index].into(), k))?,
    }];
    for &method in methods {
        let hits = mean(&|gt, k| {
            if !report.is_selected(gt.component_index) {
                return Ok(0);
            }
            let ranking = method_ranking(report, method, gt.component_index)
                .ok_or_else(|| EvalError::UnknownMethod(format!("{} (not computed)", method.name())))?;
            hit_at_k(&ranking, &gt.sentence_set(), k)
        })?;
        out.push(CaseHits {
            case_id: first.case_id.clone(),
            method: method.name().to_string(),
            hits,
        });
    }
    Ok(out)
}
