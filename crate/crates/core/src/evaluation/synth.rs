//! Planted-driver cases with ground truth known by construction.
//!
//! Every case in a suite shares one reference bigram corpus. For each case the
//! corpus repeats a trigger sentence ending in a case-unique code token,
//! immediately followed by the case's target action. The driver component of
//! the trajectory ends with that trigger sentence, so the action's likelihood
//! jumps when the driver enters the prefix and collapses when the trigger is
//! ablated. Each emitted case is re-checked by a sequential brute-force replay
//! before it is accepted.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, GroundTruth};
use crate::scorer::{build_ngram, tokenize, NGramModel};
use crate::trajectory::{
    ablate_sentence, render_context, segment_sentences, ComponentKind, RenderTemplate,
    SegmenterConfig, Trajectory, TrajectoryMeta, Upto,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_cases: usize,
    /// Inclusive range of context components per case.
    pub components: (usize, usize),
    /// Inclusive range of sentences per component.
    pub sentences: (usize, usize),
    /// Copies of each trigger-then-action line in the reference corpus.
    pub trigger_strength: usize,
    /// Number of distinct codes; triggers and filler log lines draw from it.
    pub code_space: usize,
    /// Probability that a filler sentence mentions a code.
    pub code_mention_rate: f64,
    pub corpus_lines: usize,
    pub order: usize,
    pub alpha: f64,
    pub max_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_cases: 50,
            components: (4, 8),
            sentences: (2, 5),
            trigger_strength: 20,
            code_space: 1000,
            code_mention_rate: 0.15,
            corpus_lines: 400,
            order: 2,
            alpha: 0.1,
            max_attempts: 200,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::SynthConfig(m));
        if self.num_cases == 0 {
            return bad("num_cases must be at least 1".into());
        }
        if self.components.0 == 0 || self.components.0 > self.components.1 {
            return bad(format!("component range {:?} is empty", self.components));
        }
        if self.sentences.0 == 0 || self.sentences.0 > self.sentences.1 {
            return bad(format!("sentence range {:?} is empty", self.sentences));
        }
        if self.trigger_strength == 0 {
            return bad("trigger_strength must be at least 1".into());
        }
        if self.num_cases > self.code_space {
            return bad(format!(
                "{} cases cannot each get a unique trigger code from a space of {}",
                self.num_cases, self.code_space
            ));
        }
        if !(0.0..=1.0).contains(&self.code_mention_rate) {
            return bad(format!("code_mention_rate {} outside [0, 1]", self.code_mention_rate));
        }
        if self.order < 2 {
            return bad("planted cases need a model of order at least 2".into());
        }
        Ok(())
    }
}

const NOUNS: &[&str] = &[
    "parcel", "courier", "warehouse", "route", "driver", "customer", "invoice", "ticket",
    "server", "report", "schedule", "forecast", "meeting", "budget", "shipment", "account",
    "battery", "sensor", "venue", "garden", "contract", "laptop", "budget", "library",
    "kitchen", "printer", "dataset", "manager", "vendor", "calendar",
];
const ADJECTIVES: &[&str] = &[
    "quiet", "late", "blue", "spare", "urgent", "minor", "routine", "shared", "remote", "fresh",
    "backup", "weekly", "narrow", "stable", "empty",
];
const VERBS: &[&str] = &[
    "arrived", "waited", "stopped", "moved", "opened", "closed", "changed", "paused", "started",
    "finished", "checked", "cleared",
];
const TASKS: &[&str] = &[
    "plan the week", "sort the backlog", "book a room", "track the order", "review the notes",
    "fix the report",
];
const ACTIONS: &[&str] = &[
    "reschedule", "escalate", "reroute", "refund", "pause", "notify", "cancel", "relocate",
    "approve", "archive",
];
const OBJECTS: &[&str] = &["the delivery", "the event", "the request", "the order", "the task"];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn code_name(n: usize) -> String {
    format!("R{n:04}")
}

fn filler_sentence<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> String {
    if rng.gen_bool(cfg.code_mention_rate) {
        let code = code_name(rng.gen_range(0..cfg.code_space));
        return format!("Log entry {code} was archived.");
    }
    let (n1, n2, adj, verb) = (pick(rng, NOUNS), pick(rng, NOUNS), pick(rng, ADJECTIVES), pick(rng, VERBS));
    match rng.gen_range(0..5) {
        0 => format!("The {adj} {n1} {verb} near the {n2}."),
        1 => format!("A {n1} was {verb} by the {adj} {n2}."),
        2 => format!("Did the {n1} reach the {n2}?"),
        3 => format!("Note that the {n1} looks {adj}!"),
        _ => format!("Someone {verb} the {n1} and the {n2}."),
    }
}

fn intro_sentence<R: Rng>(rng: &mut R, kind: ComponentKind) -> Option<String> {
    let noun = pick(rng, NOUNS);
    match kind {
        ComponentKind::User => Some(format!("Please help me {} for the {noun}.", pick(rng, TASKS))),
        ComponentKind::Thought => Some(format!("I should check the {noun} first.")),
        ComponentKind::Tool => Some(format!("Call lookup_{noun} with the {} record.", pick(rng, ADJECTIVES))),
        ComponentKind::Obs => Some(format!("The tool returned the {noun} status.")),
        ComponentKind::Memory => None,
    }
}

/// Suite-level decisions for one case, fixed before any filler is drawn.
#[derive(Debug, Clone, PartialEq)]
struct CasePlan {
    code: String,
    trigger: String,
    target: String,
    driver_kind: ComponentKind,
}

impl CasePlan {
    fn target_head(&self) -> &str {
        self.target.split_whitespace().next().expect("target is non-empty")
    }
}

/// A generated case with its construction metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub trajectory: Trajectory,
    pub ground_truth: GroundTruth,
    pub trigger_code: String,
    /// Generation attempts used; earlier attempts were rejected.
    pub attempts: usize,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ a) ^ b))
}

/// Shared reference model plus per-case plans.
pub struct SyntheticSuite {
    cfg: SynthConfig,
    plans: Vec<CasePlan>,
    model: NGramModel,
    template: RenderTemplate,
    segmenter: SegmenterConfig,
}

impl SyntheticSuite {
    pub fn new(cfg: SynthConfig) -> Result<Self, EvalError> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, u64::MAX, 0);
        let mut codes: Vec<usize> = (0..cfg.code_space).collect();
        codes.shuffle(&mut rng);
        let plans: Vec<CasePlan> = (0..cfg.num_cases)
            .map(|idx| {
                let code = code_name(codes[idx]);
                let memory_driven = idx % 2 == 0;
                let trigger = if memory_driven {
                    format!("Stored policy marks priority code {code}")
                } else {
                    format!("Sensor feed returned alert code {code}")
                };
                let target = format!(
                    "{}_{idx:03} {} now",
                    pick(&mut rng, ACTIONS),
                    pick(&mut rng, OBJECTS)
                );
                CasePlan {
                    code,
                    trigger,
                    target,
                    driver_kind: if memory_driven {
                        ComponentKind::Memory
                    } else {
                        ComponentKind::Obs
                    },
                }
            })
            .collect();

        let mut corpus: Vec<String> = Vec::new();
        let mut rng = stream(cfg.seed, u64::MAX, 1);
        for _ in 0..cfg.corpus_lines {
            let kind = ComponentKind::ALL[rng.gen_range(0..ComponentKind::ALL.len())];
            let mut line: Vec<String> = intro_sentence(&mut rng, kind).into_iter().collect();
            for _ in 0..rng.gen_range(1..=3) {
                line.push(filler_sentence(&mut rng, &cfg));
            }
            corpus.push(line.join(" "));
        }
        for plan in &plans {
            for _ in 0..cfg.trigger_strength {
                corpus.push(format!("{} {}", plan.trigger, plan.target));
            }
        }
        let model = build_ngram(&corpus, cfg.order, cfg.alpha)
            .map_err(|e| EvalError::SynthConfig(e.to_string()))?;
        Ok(Self {
            cfg,
            plans,
            model,
            template: RenderTemplate::default(),
            segmenter: SegmenterConfig::default(),
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn model(&self) -> &NGramModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn case_id(&self, idx: usize) -> String {
        format!("synth-{}-{idx:03}", self.cfg.seed)
    }

    /// Draws one candidate trajectory for case `idx`.
    fn draft(&self, idx: usize, attempt: usize) -> (Trajectory, GroundTruth) {
        let plan = &self.plans[idx];
        let cfg = &self.cfg;
        let mut rng = stream(cfg.seed, idx as u64, attempt as u64);
        let n = rng.gen_range(cfg.components.0..=cfg.components.1);
        let driver = if n == 1 { 0 } else { rng.gen_range(1..n) };
        let mut components = Vec::with_capacity(n);
        let mut planted_sentence = 0;
        for pos in 0..n {
            let kind = if pos == driver {
                plan.driver_kind
            } else if pos == 0 {
                ComponentKind::User
            } else if rng.gen_bool(0.2) {
                ComponentKind::Memory
            } else {
                [ComponentKind::Thought, ComponentKind::Tool, ComponentKind::Obs][pos % 3]
            };
            let count = rng.gen_range(cfg.sentences.0..=cfg.sentences.1);
            let mut sentences: Vec<String> = Vec::with_capacity(count);
            if pos != driver {
                sentences.extend(intro_sentence(&mut rng, kind));
            }
            let fillers = if pos == driver { count - 1 } else { count.saturating_sub(sentences.len()) };
            for _ in 0..fillers {
                sentences.push(filler_sentence(&mut rng, cfg));
            }
            if pos == driver {
                planted_sentence = sentences.len();
                sentences.push(plan.trigger.clone());
            }
            let sep = if rng.gen_bool(0.3) { "\n" } else { " " };
            components.push((kind, sentences.join(sep)));
        }
        let case_id = self.case_id(idx);
        let traj = Trajectory::new(
            TrajectoryMeta {
                id: case_id.clone(),
                source_model: format!("synthetic-ngram-o{}", cfg.order),
                system_prompt: None,
            },
            components,
            plan.target.clone(),
        )
        .expect("generated components are non-empty");
        let gt = GroundTruth {
            case_id,
            component_index: driver,
            sentence_indices: vec![planted_sentence],
        };
        (traj, gt)
    }

    /// Generates case `idx`, redrawing until the uniqueness and soundness
    /// checks both pass.
    pub fn case(&self, idx: usize) -> Result<SynthCase, EvalError> {
        if idx >= self.plans.len() {
            return Err(EvalError::SynthConfig(format!(
                "case index {idx} outside suite of {}",
                self.plans.len()
            )));
        }
        let plan = &self.plans[idx];
        for attempt in 0..self.cfg.max_attempts {
            let (traj, gt) = self.draft(idx, attempt);
            if gt.validate(&traj, &self.segmenter).is_err()
                || !check_trigger_uniqueness(&traj, &gt, &plan.code, &self.segmenter)
            {
                continue;
            }
            if verify_planted_case(&traj, &gt, &self.model, &self.template, &self.segmenter) {
                return Ok(SynthCase {
                    trajectory: traj,
                    ground_truth: gt,
                    trigger_code: plan.code.clone(),
                    attempts: attempt + 1,
                });
            }
        }
        Err(EvalError::SynthExhausted {
            case_index: idx,
            attempts: self.cfg.max_attempts,
        })
    }

    pub fn cases(&self) -> Result<Vec<SynthCase>, EvalError> {
        (0..self.plans.len()).map(|i| self.case(i)).collect()
    }

    /// First token of the case's target action.
    pub fn target_head(&self, idx: usize) -> &str {
        self.plans[idx].target_head()
    }
}

/// Builds case `idx` of the suite described by `cfg`, returning it with the
/// suite's shared reference model.
pub fn generate_synthetic_case(
    cfg: &SynthConfig,
    idx: usize,
) -> Result<(Trajectory, GroundTruth, NGramModel), EvalError> {
    let suite = SyntheticSuite::new(cfg.clone())?;
    let case = suite.case(idx)?;
    Ok((case.trajectory, case.ground_truth, suite.model.clone()))
}

/// True when the trigger code occurs only inside the planted sentence.
pub fn check_trigger_uniqueness(
    traj: &Trajectory,
    gt: &GroundTruth,
    code: &str,
    seg: &SegmenterConfig,
) -> bool {
    let planted = gt.sentence_set();
    traj.components().iter().all(|c| {
        segment_sentences(c, seg).iter().all(|s| {
            let is_planted = c.index == gt.component_index && planted.contains(&s.sentence_index);
            is_planted || !tokenize(&s.text).contains(&code)
        })
    })
}

/// Sequential brute-force replay with the reference model: the planted
/// component must have the strictly largest gain and a planted sentence the
/// strictly largest drop within it.
pub fn verify_planted_case(
    traj: &Trajectory,
    gt: &GroundTruth,
    model: &NGramModel,
    tmpl: &RenderTemplate,
    seg: &SegmenterConfig,
) -> bool {
    let score = |ctx: &str| -> Option<f64> {
        model.score_text(ctx, traj.target_action()).ok().map(|r| r.total_logprob)
    };
    let mut psi = Vec::with_capacity(traj.len() + 1);
    for len in 0..=traj.len() {
        match render_context(traj, Upto::from_len(len), tmpl).ok().and_then(|c| score(&c)) {
            Some(v) => psi.push(v),
            None => return false,
        }
    }
    let gains: Vec<f64> = psi.windows(2).map(|w| w[1] - w[0]).collect();
    if !strict_argmax_in(&gains, |i| i == gt.component_index) {
        return false;
    }

    let i = gt.component_index;
    let Some(full) = render_context(traj, Upto::Through(i), tmpl).ok().and_then(|c| score(&c)) else {
        return false;
    };
    let count = segment_sentences(&traj.components()[i], seg).len();
    let mut drops = Vec::with_capacity(count);
    for j in 0..count {
        match ablate_sentence(traj, i, j, tmpl, seg).ok().and_then(|c| score(&c)) {
            Some(v) => drops.push(full - v),
            None => return false,
        }
    }
    let planted = gt.sentence_set();
    strict_argmax_in(&drops, |j| planted.contains(&j))
}

/// The maximum is attained only at indices satisfying `ok`, and every other
/// index is strictly smaller.
fn strict_argmax_in(values: &[f64], ok: impl Fn(usize) -> bool) -> bool {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .all(|(i, &v)| if ok(i) { true } else { v < best })
        && values.iter().enumerate().any(|(i, &v)| ok(i) && v == best)
}
