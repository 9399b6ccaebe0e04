//! Comparison methods for sentence-level attribution that only need
//! log-probability access: leave-one-out and a sparse linear surrogate over
//! random sentence ablations.

mod lasso;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use lasso::{lasso, LassoError, LassoFit, LassoParams};

use crate::fanout::map_bounded;
use crate::replay::{logprob, AttributionError, ReplayConfig};
use crate::scorer::Scorer;
use crate::sentence::{drop_values, full_prefix_score, sentences_of};
use crate::trajectory::{render_masked, Trajectory};

/// Keep (`true`) or drop bit per sentence of one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AblationMask {
    pub bits: Vec<bool>,
}

impl AblationMask {
    pub fn all_kept(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    fn features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub num_samples: usize,
    pub rmse: f64,
    pub sweeps: usize,
    /// What the surrogate regresses on.
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextCiteConfig {
    pub num_samples: usize,
    pub keep_prob: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ContextCiteConfig {
    fn default() -> Self {
        Self {
            num_samples: 64,
            keep_prob: 0.5,
            lambda: 0.01,
            seed: 0,
        }
    }
}

/// Leave-one-out scores for every sentence of component `i`: the drop in the
/// target's log-likelihood after removing the sentence. Shares its code path
/// with [`crate::sentence::prob_drop`].
pub fn loo_attribution<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<Vec<f64>, AttributionError> {
    let sentences = sentences_of(traj, i, cfg)?;
    let full = full_prefix_score(traj, i, scorer, cfg)?;
    drop_values(traj, i, &sentences, full, scorer, cfg)
}

/// Seeded Bernoulli(`keep_prob`) masks. Sample 0 is always the all-kept mask.
pub fn sample_masks(
    n_sentences: usize,
    num_samples: usize,
    keep_prob: f64,
    seed: u64,
) -> Result<Vec<AblationMask>, AttributionError> {
    if num_samples == 0 {
        return Err(AttributionError::Config("num_samples must be at least 1".into()));
    }
    if !(keep_prob > 0.0 && keep_prob < 1.0) {
        return Err(AttributionError::Config(format!(
            "keep_prob must lie in (0, 1), got {keep_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = vec![AblationMask::all_kept(n_sentences)];
    masks.extend((1..num_samples).map(|_| AblationMask {
        bits: (0..n_sentences).map(|_| rng.gen_bool(keep_prob)).collect(),
    }));
    Ok(masks)
}

/// Target log-likelihood with component `i` reduced to the kept sentences.
pub fn surrogate_score<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    mask: &AblationMask,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<f64, AttributionError> {
    let sentences = sentences_of(traj, i, cfg)?;
    masked_score(traj, i, &sentences, mask, scorer, cfg)
}

fn masked_score<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    sentences: &[crate::trajectory::Sentence],
    mask: &AblationMask,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<f64, AttributionError> {
    let ctx = render_masked(traj, i, sentences, &mask.bits, &cfg.template)?;
    Ok(logprob(scorer, &ctx, traj.target_action())
        .map_err(|e| e.at(format!("component {i} under ablation mask")))?)
}

/// Fits the sparse linear surrogate `score ~ mask . weights + intercept`.
pub fn fit_lasso(
    masks: &[AblationMask],
    scores: &[f64],
    lambda: f64,
) -> Result<SurrogateFit, LassoError> {
    let x: Vec<Vec<f64>> = masks.iter().map(AblationMask::features).collect();
    let fit = lasso(&x, scores, None, LassoParams::new(lambda))?;
    Ok(SurrogateFit {
        weights: fit.weights,
        intercept: fit.intercept,
        lambda,
        num_samples: masks.len(),
        rmse: fit.rmse,
        sweeps: fit.sweeps,
        target: "log_prob".into(),
    })
}

/// Per-component seed, so different components draw different masks.
fn component_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Masks, their surrogate scores and the fitted weights for component `i`.
pub fn contextcite_attribution<S: Scorer + ?Sized>(
    traj: &Trajectory,
    i: usize,
    scorer: &S,
    cfg: &ReplayConfig,
    cc: &ContextCiteConfig,
) -> Result<SurrogateFit, AttributionError> {
    let sentences = sentences_of(traj, i, cfg)?;
    let masks = sample_masks(
        sentences.len(),
        cc.num_samples,
        cc.keep_prob,
        component_seed(cc.seed, i),
    )?;
    let scores = map_bounded(&masks, cfg.max_in_flight, |_, mask| {
        masked_score(traj, i, &sentences, mask, scorer, cfg)
    })?;
    Ok(fit_lasso(&masks, &scores, cc.lambda)?)
}
