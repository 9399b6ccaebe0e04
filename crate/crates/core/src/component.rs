//! Component-level attribution from temporal likelihood dynamics.
//!
//! The target action is scored under every prefix of the trajectory. The
//! gain of a component is the change in log-likelihood when it is first
//! revealed; the empty prefix supplies the baseline for the first component.

use serde::{Deserialize, Serialize};

use crate::fanout::map_bounded;
use crate::replay::{logprob, AttributionError, ReplayConfig};
use crate::scorer::Scorer;
use crate::trajectory::{render_context, Trajectory, Upto};

/// `psi[0]` scores the empty prefix; `psi[i]` the first `i` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixSupportVector {
    pub psi: Vec<f64>,
}

/// `gains[i] = psi[i + 1] - psi[i]`: the gain of component `i` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GainVector {
    pub gains: Vec<f64>,
}

impl GainVector {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedComponent {
    pub component_index: usize,
    pub gain: f64,
}

/// Components in descending gain order; ties go to the earlier component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentRanking {
    pub ranked: Vec<RankedComponent>,
}

impl ComponentRanking {
    pub fn indices(&self) -> Vec<usize> {
        self.ranked.iter().map(|r| r.component_index).collect()
    }
}

/// Rule for promoting components to sentence-level analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    TopK(usize),
    /// Components whose gain z-score exceeds the threshold.
    ZThreshold(f64),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::TopK(3)
    }
}

/// Scores the target action under each prefix `C_{<=i}`, `i = 0..=N`.
pub fn prefix_supports<S: Scorer + ?Sized>(
    traj: &Trajectory,
    scorer: &S,
    cfg: &ReplayConfig,
) -> Result<PrefixSupportVector, AttributionError> {
    let contexts = (0..=traj.len())
        .map(|len| render_context(traj, Upto::from_len(len), &cfg.template))
        .collect::<Result<Vec<_>, _>>()?;
    let psi = map_bounded(&contexts, cfg.max_in_flight, |len, ctx| {
        logprob(scorer, ctx, traj.target_action()).map_err(|e| e.at(format!("prefix {len}")))
    })?;
    Ok(PrefixSupportVector { psi })
}

pub fn temporal_gains(psi: &PrefixSupportVector) -> Result<GainVector, AttributionError> {
    if psi.psi.len() < 2 {
        return Err(AttributionError::TooShort(psi.psi.len()));
    }
    if let Some(bad) = psi.psi.iter().find(|v| !v.is_finite()) {
        return Err(AttributionError::NonFinite(format!("prefix support {bad}")));
    }
    Ok(GainVector {
        gains: psi.psi.windows(2).map(|w| w[1] - w[0]).collect(),
    })
}

/// Full descending ranking plus the selected components, in rank order.
pub fn rank_components(gains: &GainVector, selection: Selection) -> (ComponentRanking, Vec<usize>) {
    let mut ranked: Vec<RankedComponent> = gains
        .gains
        .iter()
        .enumerate()
        .map(|(component_index, &gain)| RankedComponent {
            component_index,
            gain,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then(a.component_index.cmp(&b.component_index))
    });

    let selected = match selection {
        Selection::TopK(k) => ranked.iter().take(k).map(|r| r.component_index).collect(),
        Selection::ZThreshold(threshold) => {
            let n = gains.len() as f64;
            let mean = gains.gains.iter().sum::<f64>() / n;
            let var = gains.gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 {
                ranked
                    .iter()
                    .filter(|r| (r.gain - mean) / sd > threshold)
                    .map(|r| r.component_index)
                    .collect()
            } else {
                Vec::new()
            }
        }
    };
    (ComponentRanking { ranked }, selected)
}
