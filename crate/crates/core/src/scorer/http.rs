//! Completions-endpoint scorer.
//!
//! Sends `context + target` as the prompt with echo enabled and zero new
//! tokens, then sums the echoed log-probabilities of the tokens that belong
//! to the target.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LogProbResult, ScoreError, ScoreRequest, Scorer, TokenLogProb};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL; requests go to `{endpoint}/v1/completions`.
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Environment variable holding the bearer token. Unset means no
    /// `Authorization` header.
    pub api_key_env: Option<String>,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000".into(),
            model: "default".into(),
            timeout_secs: 60,
            max_retries: 2,
            api_key_env: Some("SCORER_API_KEY".into()),
            max_in_flight: 8,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpScorer {
    cfg: HttpConfig,
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    slots: Slots,
}

impl HttpScorer {
    pub fn new(cfg: HttpConfig) -> Result<Self, ScoreError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => match std::env::var(var) {
                Ok(key) => Some(key),
                Err(std::env::VarError::NotPresent) => None,
                Err(_) => return Err(ScoreError::MissingApiKey(var.clone())),
            },
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ScoreError::Unreachable {
                attempts: 0,
                message: e.to_string(),
            })?;
        let url = format!("{}/v1/completions", cfg.endpoint.trim_end_matches('/'));
        Ok(Self {
            slots: Slots::new(cfg.max_in_flight),
            cfg,
            url,
            api_key,
            client,
        })
    }

    fn post(&self, body: &Value) -> Result<Value, ScoreError> {
        let _slot = self.slots.acquire();
        let attempts = self.cfg.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 << attempt.min(6)));
            }
            let mut req = self.client.post(&self.url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp.json::<Value>().map_err(|e| {
                        ScoreError::MalformedBackendResponse(format!("body is not JSON: {e}"))
                    });
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let body = resp.text().unwrap_or_default();
                    tracing::warn!(status, attempt, "scoring backend returned an error status");
                    last = Some(ScoreError::HttpStatus { status, body });
                }
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "scoring backend request failed");
                    last = Some(ScoreError::Unreachable {
                        attempts,
                        message: e.to_string(),
                    });
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

impl Scorer for HttpScorer {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        let prompt = format!("{}{}", req.context(), req.target());
        let body = json!({
            "model": self.cfg.model,
            "prompt": prompt,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 1,
        });
        let resp = self.post(&body)?;
        let result = extract_target_logprobs(
            &resp,
            req.context().chars().count(),
            prompt.chars().count(),
        )?;
        for w in &result.warnings {
            tracing::warn!("{w}");
        }
        Ok(result)
    }

    fn identity(&self) -> String {
        format!("http:{}#{}", self.cfg.endpoint.trim_end_matches('/'), self.cfg.model)
    }
}

/// Sums the echoed log-probabilities of target tokens.
///
/// Offsets are character offsets into the prompt. A token belongs to the
/// target when it starts at or after `context_chars`; a token that starts
/// inside the context but ends past it straddles the boundary and is counted
/// as target with a warning.
pub fn extract_target_logprobs(
    resp: &Value,
    context_chars: usize,
    prompt_chars: usize,
) -> Result<LogProbResult, ScoreError> {
    let malformed = |m: &str| ScoreError::MalformedBackendResponse(m.to_owned());
    let logprobs = resp
        .pointer("/choices/0/logprobs")
        .filter(|v| !v.is_null())
        .ok_or_else(|| malformed("missing choices[0].logprobs"))?;
    let field = |name: &str| {
        logprobs
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(&format!("missing logprobs.{name}")))
    };
    let tokens = field("tokens")?;
    let values = field("token_logprobs")?;
    let offsets = field("text_offset")?;
    if tokens.len() != values.len() || tokens.len() != offsets.len() {
        return Err(malformed("logprobs arrays differ in length"));
    }
    let offsets = offsets
        .iter()
        .map(|o| o.as_u64().map(|o| o as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| malformed("text_offset entries must be non-negative integers"))?;

    let mut picked = Vec::new();
    let mut warnings = Vec::new();
    for (k, &start) in offsets.iter().enumerate() {
        let end = offsets.get(k + 1).copied().unwrap_or(prompt_chars);
        let token = tokens[k].as_str().unwrap_or_default().to_owned();
        if start < context_chars {
            if end <= context_chars {
                continue;
            }
            warnings.push(format!(
                "token {k} ({token:?}) spans the context/target boundary at char {context_chars}; \
                 counted as target"
            ));
        }
        let logprob = values[k].as_f64().ok_or_else(|| {
            malformed(&format!("no logprob for target token {k} ({token:?})"))
        })?;
        if !logprob.is_finite() {
            return Err(malformed(&format!("non-finite logprob for token {k}")));
        }
        picked.push(TokenLogProb { token, logprob });
    }
    if picked.is_empty() {
        return Err(malformed("response contains no target tokens"));
    }
    Ok(LogProbResult::from_tokens(picked, warnings))
}
