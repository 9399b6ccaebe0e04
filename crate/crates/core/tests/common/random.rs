//! Seeded random trajectories and test scorers.

#![allow(dead_code)]

use agentattr_core::scorer::{
    build_ngram, LogProbResult, NGramModel, ScoreError, ScoreRequest, Scorer, TokenLogProb,
};
use agentattr_core::trajectory::{ComponentKind, Trajectory, TrajectoryMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel", "india", "juliet",
    "kilo", "lima", "mike", "nova", "oscar", "papa",
];

fn sentence(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(2..7);
    let words: Vec<&str> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
    let end = [".", "!", "?"][rng.gen_range(0..3)];
    format!("{}{end}", words.join(" "))
}

pub fn random_trajectory(seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..9);
    let components = (0..n)
        .map(|_| {
            let kind = ComponentKind::ALL[rng.gen_range(0..5)];
            let count = rng.gen_range(1..5);
            let text: Vec<String> = (0..count).map(|_| sentence(&mut rng)).collect();
            (kind, text.join(" "))
        })
        .collect();
    let target: Vec<&str> = (0..rng.gen_range(1..4)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
    let system_prompt = rng.gen_bool(0.3).then(|| "You are a careful agent.".to_string());
    Trajectory::new(
        TrajectoryMeta {
            id: format!("rand-{seed}"),
            source_model: "random".into(),
            system_prompt,
        },
        components,
        target.join(" "),
    )
    .unwrap()
}

pub fn random_model(seed: u64, order: usize) -> NGramModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let lines: Vec<String> = (0..60).map(|_| sentence(&mut rng)).collect();
    build_ngram(&lines, order, 0.5).unwrap()
}

/// `base + sum of weights of the "Fact j holds." sentences present`.
pub struct AdditiveScorer {
    pub base: f64,
    pub weights: Vec<f64>,
}

impl AdditiveScorer {
    pub fn fact(j: usize) -> String {
        format!("Fact {j} holds.")
    }
}

impl Scorer for AdditiveScorer {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        let total = self.base
            + self
                .weights
                .iter()
                .enumerate()
                .filter(|(j, _)| req.context().contains(&Self::fact(*j)))
                .map(|(_, w)| w)
                .sum::<f64>();
        Ok(LogProbResult::from_tokens(
            vec![TokenLogProb {
                token: req.target().to_string(),
                logprob: total,
            }],
            Vec::new(),
        ))
    }

    fn identity(&self) -> String {
        "additive".into()
    }
}

pub fn additive_trajectory(n: usize) -> Trajectory {
    let facts: Vec<String> = (0..n).map(AdditiveScorer::fact).collect();
    Trajectory::new(
        TrajectoryMeta {
            id: format!("additive-{n}"),
            source_model: "additive".into(),
            system_prompt: None,
        },
        vec![
            (ComponentKind::User, "Decide.".into()),
            (ComponentKind::Memory, facts.join(" ")),
        ],
        "act",
    )
    .unwrap()
}

/// Largest violation of the lasso optimality conditions for
/// `(1/2m) |y - X beta - b|^2 + lambda |beta|_1`.
pub fn kkt_violation(x: &[Vec<f64>], y: &[f64], weights: &[f64], intercept: f64, lambda: f64) -> f64 {
    let m = x.len() as f64;
    let resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, t)| t - intercept - row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let mean_resid = resid.iter().sum::<f64>() / m;
    let mut worst = mean_resid.abs();
    for (j, &w) in weights.iter().enumerate() {
        let corr = x.iter().zip(&resid).map(|(row, r)| row[j] * r).sum::<f64>() / m;
        let v = if w == 0.0 {
            (corr.abs() - lambda).max(0.0)
        } else {
            (corr - lambda * w.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}
