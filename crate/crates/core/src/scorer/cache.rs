use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LogProbResult, ScoreError, ScoreRequest, Scorer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CacheConfig {
    pub enabled: bool,
    pub max_entries: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_entries: 100_000,
        }
    }
}

/// Request accounting for a [`CachingScorer`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerStats {
    /// Every `score` call, hit or miss.
    pub requests: u64,
    /// Calls that reached the backend.
    pub backend_calls: u64,
}

type Key = [u8; 32];
type Slot = Arc<OnceCell<LogProbResult>>;

#[derive(Default)]
struct Entries {
    map: HashMap<Key, Slot>,
    order: VecDeque<Key>,
}

/// Memoizes scores by `(backend identity, context, target)`.
///
/// Concurrent requests for the same key wait on a single backend call, so
/// the number of backend calls is a function of the distinct requests only.
pub struct CachingScorer<S> {
    inner: S,
    identity: String,
    cfg: CacheConfig,
    entries: Mutex<Entries>,
    requests: AtomicU64,
    backend_calls: AtomicU64,
}

impl<S: Scorer> CachingScorer<S> {
    pub fn new(inner: S, cfg: CacheConfig) -> Self {
        let identity = inner.identity();
        Self {
            inner,
            identity,
            cfg,
            entries: Mutex::new(Entries::default()),
            requests: AtomicU64::new(0),
            backend_calls: AtomicU64::new(0),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn stats(&self) -> ScorerStats {
        ScorerStats {
            requests: self.requests.load(Ordering::SeqCst),
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
        }
    }

    pub fn reset_stats(&self) {
        self.requests.store(0, Ordering::SeqCst);
        self.backend_calls.store(0, Ordering::SeqCst);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(&self, req: &ScoreRequest) -> Key {
        let mut h = Sha256::new();
        for part in [self.identity.as_str(), req.context(), req.target()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.finalize().into()
    }

    fn slot(&self, key: Key) -> Slot {
        let mut entries = self.entries.lock().unwrap();
        if let Some(slot) = entries.map.get(&key) {
            return slot.clone();
        }
        while entries.map.len() >= self.cfg.max_entries.max(1) {
            match entries.order.pop_front() {
                Some(old) => {
                    entries.map.remove(&old);
                }
                None => break,
            }
        }
        let slot = Slot::default();
        entries.map.insert(key, slot.clone());
        entries.order.push_back(key);
        slot
    }

    fn call_backend(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        self.backend_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score(req)
    }
}

impl<S: Scorer> Scorer for CachingScorer<S> {
    fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if !self.cfg.enabled {
            return self.call_backend(req);
        }
        let slot = self.slot(self.key(req));
        // Errors are not cached; the next request retries the backend.
        slot.get_or_try_init(|| self.call_backend(req)).cloned()
    }

    fn identity(&self) -> String {
        self.identity.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        hits: AtomicUsize,
        fail: bool,
    }

    impl Scorer for Counting {
        fn score(&self, req: &ScoreRequest) -> Result<LogProbResult, ScoreError> {
            self.hits.fetch_add(1, Ordering::SeqCst);
            if self.fail {
                return Err(ScoreError::MalformedBackendResponse("boom".into()));
            }
            Ok(LogProbResult {
                total_logprob: -(req.context().len() as f64) - 1.0,
                token_count: 1,
                per_token: None,
                warnings: vec![],
            })
        }

        fn identity(&self) -> String {
            "counting".into()
        }
    }

    fn counting(fail: bool) -> Counting {
        Counting {
            hits: AtomicUsize::new(0),
            fail,
        }
    }

    #[test]
    fn repeat_request_is_served_from_cache() {
        let s = CachingScorer::new(counting(false), CacheConfig::default());
        let req = ScoreRequest::new("abc", "x").unwrap();
        let a = s.score(&req).unwrap();
        let b = s.score(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.inner().hits.load(Ordering::SeqCst), 1);
        assert_eq!(
            s.stats(),
            ScorerStats {
                requests: 2,
                backend_calls: 1
            }
        );
    }

    #[test]
    fn disabled_cache_passes_through_with_same_values() {
        let on = CachingScorer::new(counting(false), CacheConfig::default());
        let off = CachingScorer::new(
            counting(false),
            CacheConfig {
                enabled: false,
                ..Default::default()
            },
        );
        for ctx in ["", "a", "ab", "a"] {
            let req = ScoreRequest::new(ctx, "t").unwrap();
            assert_eq!(on.score(&req).unwrap(), off.score(&req).unwrap());
        }
        assert_eq!(off.stats().backend_calls, 4);
        assert_eq!(on.stats().backend_calls, 3);
    }

    #[test]
    fn errors_are_not_cached() {
        let s = CachingScorer::new(counting(true), CacheConfig::default());
        let req = ScoreRequest::new("", "t").unwrap();
        assert!(s.score(&req).is_err());
        assert!(s.score(&req).is_err());
        assert_eq!(s.inner().hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn eviction_bounds_size() {
        let s = CachingScorer::new(
            counting(false),
            CacheConfig {
                enabled: true,
                max_entries: 2,
            },
        );
        for ctx in ["a", "b", "c"] {
            s.score(&ScoreRequest::new(ctx, "t").unwrap()).unwrap();
        }
        assert_eq!(s.len(), 2);
        s.score(&ScoreRequest::new("a", "t").unwrap()).unwrap();
        assert_eq!(s.inner().hits.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn concurrent_identical_requests_hit_backend_once() {
        let s = CachingScorer::new(counting(false), CacheConfig::default());
        let req = ScoreRequest::new("same", "t").unwrap();
        std::thread::scope(|scope| {
            for _ in 0..8 {
                scope.spawn(|| s.score(&req).unwrap());
            }
        });
        assert_eq!(s.inner().hits.load(Ordering::SeqCst), 1);
        assert_eq!(s.stats().requests, 8);
    }
}
