//! Sentence-level attribution inside high-impact components.
//!
//! Every sentence of a selected component is scored by how much the target
//! action's likelihood drops when the sentence is removed from the prefix
//! (necessity) and how well the sentence supports the action on its own
//! (sufficiency). The two are summed into `phi`.

use serde::{Deserialize, Serialize};

use crate::fanout::map_bounded;
use crate::replay::{logprob, AttributionError, ReplayConfig};
use crate::scorer::Scorer;
use crate::trajectory::{
    render_context, render_literal_sentence, render_masked, render_with_body, segment_sentences,
    RenderError, Sentence, Trajectory, Upto,
};

/// Conditioning of the first term of the hold score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldMode {
    /// The sentence alone (under its component header) is the whole context.
    #[default]
    Literal,
    /// Components before `i`, then component `i` reduced to the sentence.
    Contextual,
}

impl HoldMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HoldMode::Literal => "literal",
            HoldMode::Contextual => "contextual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub component_index: usize,
    pub sentence_index: usize,
    pub drop: f64,
    pub hold: f64,
    pub phi: f64,
}

/// One component's sentences in descending `phi` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRanking {
    pub component_index: usize,
    pub ranked: Vec<SentenceScore>,
}

impl SentenceRanking {
    pub fn indices(&self) -> Vec<usize> {
        self.ranked.iter().map(|s| s.sentence_index).collect()
    }

    /// The `m` highest-scoring sentences.
    pub fn evidence(&self, m: usize) -> &[SentenceScore] {
        &self.ranked[..m.min(self.ranked.len())]
    }
}

pub(crate) fn sentences_of(
    traj: &Trajectory,
    i: usize,
    cfg: &ReplayConfig,
) -> Result<Vec<Sentence>, AttributionError> {
    let c = traj.component(i).ok_or(RenderError::ComponentOutOfRange {
        index: i,
        len: traj.len(),
    })?;
    Ok(segment_sentences(c, &cfg.segmenter))
}

fn check_sentence(i: usize, j: usize, sentences: &[Sentence]) -> Result<(), AttributionError> {
    if j < sentences.len() {
        Ok(())
    } else {
        Err(RenderError::SentenceOutOfRange {
            component: i,
            sentence: j,
            count: sentences.len(),
        }
        .into())
    }
}

/// Score of the unablated prefix `C_{<=i}`.
pub(crate) fn full_prefix_score<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<f64, AttributionError> {
    let ctx = render_context(traj, Upto::Through(i), &cfg.template)?;
    Ok(logprob(scorer, &ctx, traj.target_action())
        .map_err(|e| e.at(format!("prefix through component {i}")))?)
}

/// Score of the prefix with sentence `j` of component `i` removed.
fn ablated_score<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    j: usize,
    sentences: &[Sentence],
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<f64, AttributionError> {
    let keep: Vec<bool> = (0..sentences.len()).map(|k| k != j).collect();
    let ctx = render_masked(traj, i, sentences, &keep, &cfg.template)?;
    Ok(logprob(scorer, &ctx, traj.target_action())
        .map_err(|e| e.at(format!("component {i} without sentence {j}")))?)
}

/// Drop values for every sentence of component `i`. This is the single code
/// path behind both [`prob_drop`] and the leave-one-out baseline.
pub(crate) fn drop_values<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    sentences: &[Sentence],
    full: f64,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<Vec<f64>, AttributionError> {
    map_bounded(sentences, cfg.max_in_flight, |j, _| {
        Ok(full - ablated_score(traj, i, j, sentences, scorer, cfg)?)
    })
}

/// Likelihood drop of the target when sentence `j` is removed from
/// component `i`, both scored under the prefix ending at `i`.
pub fn prob_drop<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    j: usize,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<f64, AttributionError> {
    let sentences = sentences_of(traj, i, cfg)?;
    check_sentence(i, j, &sentences)?;
    let full = full_prefix_score(traj, i, scorer, cfg)?;
    Ok(full - ablated_score(traj, i, j, &sentences, scorer, cfg)?)
}

fn hold_context(
    traj: &Trajectory,
    i: usize,
    sentence: &Sentence,
    mode: HoldMode,
    cfg: &ReplayConfig,
) -> Result<String, RenderError> {
    match mode {
        HoldMode::Literal => render_literal_sentence(traj, i, &sentence.text, &cfg.template),
        HoldMode::Contextual => render_with_body(traj, i, &sentence.text, &cfg.template),
    }
}

fn hold_score<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    sentence: &Sentence,
    scorer: &S,
    cfg: &ReplayConfig,
    mode: HoldMode,
) -> Result<f64, AttributionError> {
    let ctx = hold_context(traj, i, sentence, mode, cfg)?;
    Ok(logprob(scorer, &ctx, traj.target_action()).map_err(|e| {
        e.at(format!(
            "component {i} sentence {} alone",
            sentence.sentence_index
        ))
    })?)
}

/// Likelihood of the target under sentence `j` alone, relative to the full
/// prefix ending at component `i`.
pub fn prob_hold<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    j: usize,
    scorer: &S,
    cfg: &ReplayConfig,
    mode: HoldMode,
) -> Result<f64, AttributionError> {
    let sentences = sentences_of(traj, i, cfg)?;
    check_sentence(i, j, &sentences)?;
    let alone = hold_score(traj, i, &sentences[j], scorer, cfg, mode)?;
    Ok(alone - full_prefix_score(traj, i, scorer, cfg)?)
}

pub fn combined_phi(drop: f64, hold: f64) -> Result<f64, AttributionError> {
    if !(drop.is_finite() && hold.is_finite()) {
        return Err(AttributionError::NonFinite(format!("drop {drop}, hold {hold}")));
    }
    Ok(drop + hold)
}

/// Drop, hold and phi for every sentence of component `i`.
///
/// Issues `2 * N_i + 1` scorer requests: the full prefix, one ablation per
/// sentence and one hold context per sentence.
pub fn score_component<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    scorer: &S,
    cfg: &ReplayConfig,
    mode: HoldMode,
) -> Result<Vec<SentenceScore>, AttributionError> {
    let sentences = sentences_of(traj, i, cfg)?;
    let full = full_prefix_score(traj, i, scorer, cfg)?;
    let drops = drop_values(traj, i, &sentences, full, scorer, cfg)?;
    let alone = map_bounded(&sentences, cfg.max_in_flight, |_, s| {
        hold_score(traj, i, s, scorer, cfg, mode)
    })?;
    sentences
        .iter()
        .zip(drops.into_iter().zip(alone))
        .map(|(s, (drop, alone))| {
            let hold = alone - full;
            Ok(SentenceScore {
                component_index: i,
                sentence_index: s.sentence_index,
                drop,
                hold,
                phi: combined_phi(drop, hold)?,
            })
        })
        .collect()
}

/// Sorts by descending `phi`; ties go to the smaller sentence index.
pub fn rank_sentences(component_index: usize, scores: &[SentenceScore]) -> SentenceRanking {
    rank_by(component_index, scores, |s| s.phi)
}

/// Sorts by an arbitrary per-sentence value with the same tie rule.
pub fn rank_by(
    component_index: usize,
    scores: &[SentenceScore],
    key: impl Fn(&SentenceScore) -> f64,
) -> SentenceRanking {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        key(b)
            .total_cmp(&key(a))
            .then(a.sentence_index.cmp(&b.sentence_index))
    });
    SentenceRanking {
        component_index,
        ranked,
    }
}

/// Indices ordered by descending value, ties to the smaller index.
pub fn rank_values(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}
