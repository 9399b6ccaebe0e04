//! Add-alpha smoothed n-gram language model.
//!
//! Serves as the deterministic reference policy for tests and synthetic
//! evaluation. An order-1 model ignores context entirely.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LogProbResult, ScoreError, ScoreRequest, Scorer, TokenLogProb};

pub const BOS: &str = "<s>";
pub const UNK: &str = "<unk>";

const TERMINATORS: [char; 3] = ['.', '!', '?'];

/// Whitespace-delimited words, with sentence terminators split off as
/// standalone tokens.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut start = 0;
        for (pos, ch) in word.char_indices() {
            if TERMINATORS.contains(&ch) {
                if start < pos {
                    out.push(&word[start..pos]);
                }
                out.push(&word[pos..pos + ch.len_utf8()]);
                start = pos + ch.len_utf8();
            }
        }
        if start < word.len() {
            out.push(&word[start..]);
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Immutable n-gram counts with add-alpha smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    /// Sorted token types including [`UNK`]; [`BOS`] is history-only.
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    bos: u32,
    unk: u32,
    counts: HashMap<Vec<u32>, ContextCounts>,
    fingerprint: String,
}

/// Serialized form. Contexts are space-joined token strings.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    order: usize,
    alpha: f64,
    vocabulary: Vec<String>,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Builds an order-`order` model from corpus lines. Each line is padded with
/// `order - 1` [`BOS`] tokens.
pub fn build_ngram<S: AsRef<str>>(
    corpus: &[S],
    order: usize,
    alpha: f64,
) -> Result<NGramModel, ScoreError> {
    if corpus.is_empty() || corpus.iter().all(|l| tokenize(l.as_ref()).is_empty()) {
        return Err(ScoreError::EmptyCorpus);
    }
    if order == 0 {
        return Err(ScoreError::InvalidModel("order must be at least 1".into()));
    }
    let mut vocabulary: Vec<String> = corpus
        .iter()
        .flat_map(|l| tokenize(l.as_ref()))
        .filter(|t| *t != BOS)
        .map(str::to_owned)
        .collect();
    vocabulary.push(UNK.to_owned());

    let mut file = ModelFile {
        order,
        alpha,
        vocabulary,
        counts: BTreeMap::new(),
    };
    file.vocabulary.sort();
    file.vocabulary.dedup();
    let known: std::collections::HashSet<&str> =
        file.vocabulary.iter().map(String::as_str).collect();

    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for line in corpus {
        let mut seq: Vec<&str> = vec![BOS; order.saturating_sub(1)];
        seq.extend(
            tokenize(line.as_ref())
                .into_iter()
                .map(|t| if known.contains(t) { t } else { UNK }),
        );
        for pos in order.saturating_sub(1)..seq.len() {
            let ctx = seq[pos + 1 - order..pos].join(" ");
            *counts
                .entry(ctx)
                .or_default()
                .entry(seq[pos].to_owned())
                .or_default() += 1;
        }
    }
    file.counts = counts;
    NGramModel::from_file(file)
}

impl NGramModel {
    fn from_file(file: ModelFile) -> Result<Self, ScoreError> {
        if file.order == 0 {
            return Err(ScoreError::InvalidModel("order must be at least 1".into()));
        }
        if !(file.alpha.is_finite() && file.alpha > 0.0) {
            return Err(ScoreError::InvalidModel(format!(
                "smoothing alpha must be positive, got {}",
                file.alpha
            )));
        }
        let mut vocab = file.vocabulary;
        vocab.sort();
        vocab.dedup();
        if !vocab.iter().any(|t| t == UNK) {
            return Err(ScoreError::InvalidModel("vocabulary lacks <unk>".into()));
        }
        if vocab.iter().any(|t| t == BOS) {
            return Err(ScoreError::InvalidModel("<s> cannot be a predicted token".into()));
        }
        let mut ids: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let bos = vocab.len() as u32;
        ids.insert(BOS.to_owned(), bos);
        let unk = ids[UNK];

        let lookup = |tok: &str| -> Result<u32, ScoreError> {
            ids.get(tok)
                .copied()
                .ok_or_else(|| ScoreError::InvalidModel(format!("token {tok:?} not in vocabulary")))
        };
        let mut counts: HashMap<Vec<u32>, ContextCounts> = HashMap::new();
        for (ctx, next) in &file.counts {
            let key = if ctx.is_empty() {
                Vec::new()
            } else {
                ctx.split(' ').map(lookup).collect::<Result<Vec<_>, _>>()?
            };
            if key.len() != file.order - 1 {
                return Err(ScoreError::InvalidModel(format!(
                    "context {ctx:?} does not have {} tokens",
                    file.order - 1
                )));
            }
            let entry = counts.entry(key).or_default();
            for (tok, &n) in next {
                let id = lookup(tok)?;
                if id == bos {
                    return Err(ScoreError::InvalidModel("<s> cannot be predicted".into()));
                }
                *entry.next.entry(id).or_default() += n;
                entry.total += n;
            }
        }

        let mut model = Self {
            order: file.order,
            alpha: file.alpha,
            vocab,
            ids,
            bos,
            unk,
            counts,
            fingerprint: String::new(),
        };
        model.fingerprint = hex16(&Sha256::digest(model.to_json().as_bytes()));
        Ok(model)
    }

    pub fn from_json(raw: &[u8]) -> Result<Self, ScoreError> {
        let file: ModelFile = serde_json::from_slice(raw)
            .map_err(|e| ScoreError::InvalidModel(e.to_string()))?;
        Self::from_file(file)
    }

    /// Canonical serialization; identical models give identical bytes.
    pub fn to_json(&self) -> String {
        let name = |id: u32| -> &str {
            if id == self.bos {
                BOS
            } else {
                &self.vocab[id as usize]
            }
        };
        let counts = self
            .counts
            .iter()
            .map(|(ctx, cc)| {
                let key = ctx.iter().map(|&id| name(id)).collect::<Vec<_>>().join(" ");
                let next = cc
                    .next
                    .iter()
                    .map(|(&id, &n)| (name(id).to_owned(), n))
                    .collect::<BTreeMap<_, _>>();
                (key, next)
            })
            .collect::<BTreeMap<_, _>>();
        let file = ModelFile {
            order: self.order,
            alpha: self.alpha,
            vocabulary: self.vocab.clone(),
            counts,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Predictable token types, including [`UNK`].
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Maps a token to its id; out-of-vocabulary tokens become [`UNK`].
    fn id(&self, tok: &str) -> u32 {
        match self.ids.get(tok) {
            Some(&id) => id,
            None => self.unk,
        }
    }

    fn prob_ids(&self, history: &[u32], next: u32) -> f64 {
        let (total, count) = match self.counts.get(history) {
            Some(cc) => (cc.total, cc.next.get(&next).copied().unwrap_or(0)),
            None => (0, 0),
        };
        (count as f64 + self.alpha) / (total as f64 + self.alpha * self.vocab.len() as f64)
    }

    /// `P(next | history)`, where `history` holds the preceding tokens; only
    /// its last `order - 1` entries are used, padded with [`BOS`].
    pub fn prob(&self, history: &[&str], next: &str) -> f64 {
        let ids = self.history_ids(history);
        self.prob_ids(&ids, self.id(next))
    }

    fn history_ids(&self, history: &[&str]) -> Vec<u32> {
        let need = self.order - 1;
        let mut ids: Vec<u32> = vec![self.bos; need.saturating_sub(history.len())];
        let from = history.len().saturating_sub(need);
        ids.extend(history[from..].iter().map(|t| self.id(t)));
        ids
    }

    /// Sum of target-token log-probabilities given the context.
    pub fn score_text(&self, context: &str, target: &str) -> Result<LogProbResult, ScoreError> {
        let target_tokens = tokenize(target);
        if target_tokens.is_empty() {
            return Err(ScoreError::EmptyTarget);
        }
        let need = self.order - 1;
        let mut seq: Vec<u32> = vec![self.bos; need];
        seq.extend(tokenize(context).into_iter().map(|t| self.id(t)));
        let mut per_token = Vec::with_capacity(target_tokens.len());
        for tok in target_tokens {
            let id = self.id(tok);
            let p = self.prob_ids(&seq[seq.len() - need..], id);
            per_token.push(TokenLogProb {
                token: tok.to_owned(),
                logprob: p.ln(),
            });
            seq.push(id);
        }
        Ok(LogProbResult::from_tokens(per_token, Vec::new()))
    }
}

fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// [`Scorer`] over an [`NGramModel`].
#[derive(Debug, Clone)]
pub struct NGramScorer {
    model: NGramModel,
}

impl NGramScorer {
    pub fn new(model: NGramModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &NGramModel {
        &self.model
    }
}

impl Scorer for NGramScorer {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        self.model.score_text(req.context(), req.target())
    }

    fn identity(&self) -> String {
        format!("ngram-o{}-{}", self.model.order, self.model.fingerprint)
    }
}
