//! Completion gateway over pluggable backends, SQL extraction from model
//! output, and the offline fallback text encoder.

mod encoder;
mod extract;
mod http;
pub mod prompts;
mod scripted;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use encoder::{fallback_encode, EncodeError, FallbackEncoder, TextEncoder, FALLBACK_DIM};
pub use extract::{extract_sql, split_statements};
pub use http::{HttpBackend, HttpConfig};
pub use scripted::{FixtureEntry, Matcher, ScriptedBackend, ScriptedFixture};

use crate::util::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Generator,
    Expander,
    Reasoner,
}

impl ModelRole {
    pub const ALL: [ModelRole; 3] = [ModelRole::Generator, ModelRole::Expander, ModelRole::Reasoner];

    /// Sampling temperature used when a request does not override it.
    pub fn default_temperature(self) -> f64 {
        match self {
            ModelRole::Generator | ModelRole::Expander => 0.8,
            ModelRole::Reasoner => 0.3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelRole::Generator => "generator",
            ModelRole::Expander => "expander",
            ModelRole::Reasoner => "reasoner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub role: ModelRole,
}

impl CompletionRequest {
    pub const DEFAULT_TOP_P: f64 = 0.95;
    pub const DEFAULT_MAX_TOKENS: u32 = 4096;

    pub fn for_role(role: ModelRole, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: role.default_temperature(),
            top_p: Self::DEFAULT_TOP_P,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            role,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} < 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn prompt_hash(&self) -> String {
        sha256_hex(&self.prompt)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Completion {
    /// Completion with token counts estimated at four characters per token.
    pub fn estimated(prompt: &str, text: String) -> Self {
        Completion { prompt_tokens: estimate_tokens(prompt), completion_tokens: estimate_tokens(&text), text }
    }
}

pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: transport failures, rate limits, server errors.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
    #[error("no scripted response for role {role} sequence {seq} (prompt {prompt_hash})")]
    FixtureMiss { role: String, seq: u64, prompt_hash: String },
}

/// A completion source. `seq` is the gateway's per-role request counter.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest, seq: u64) -> Result<Completion, BackendError>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("no backend configured for role {0}")]
    UnknownRole(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("backend failure: {0}")]
    Fatal(String),
    #[error(transparent)]
    FixtureMiss(BackendError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): base·2^(attempt-1), capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(1)).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleUsage {
    pub requests: u64,
    pub retries: u64,
    pub failures: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    run_id: &'a str,
    role: ModelRole,
    seq: u64,
    prompt_hash: String,
    response_hash: String,
    latency_ms: f64,
    prompt_tokens: u64,
    completion_tokens: u64,
    retries: u32,
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    backends: BTreeMap<ModelRole, Arc<dyn CompletionBackend>>,
    retry: RetryPolicy,
    run_id: String,
    slots: Slots,
    counters: Mutex<BTreeMap<ModelRole, u64>>,
    usage: Mutex<BTreeMap<ModelRole, RoleUsage>>,
    transcript: Option<Mutex<BufWriter<File>>>,
}

impl Gateway {
    pub fn new(run_id: impl Into<String>, retry: RetryPolicy, concurrency: usize) -> Self {
        Gateway {
            backends: BTreeMap::new(),
            retry,
            run_id: run_id.into(),
            slots: Slots { free: Mutex::new(concurrency.max(1)), cv: Condvar::new() },
            counters: Mutex::new(BTreeMap::new()),
            usage: Mutex::new(BTreeMap::new()),
            transcript: None,
        }
    }

    pub fn with_backend(mut self, role: ModelRole, backend: Arc<dyn CompletionBackend>) -> Self {
        self.backends.insert(role, backend);
        self
    }

    /// Appends one jsonl line per completed request to `path`.
    pub fn with_transcript(mut self, path: &Path) -> std::io::Result<Self> {
        let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript = Some(Mutex::new(BufWriter::new(f)));
        Ok(self)
    }

    pub fn has_role(&self, role: ModelRole) -> bool {
        self.backends.contains_key(&role)
    }

    /// Per-role request counters, for checkpointing.
    pub fn counters(&self) -> BTreeMap<ModelRole, u64> {
        self.counters.lock().expect("counter lock poisoned").clone()
    }

    pub fn restore_counters(&self, counters: &BTreeMap<ModelRole, u64>) {
        *self.counters.lock().expect("counter lock poisoned") = counters.clone();
    }

    pub fn usage(&self) -> BTreeMap<ModelRole, RoleUsage> {
        self.usage.lock().expect("usage lock poisoned").clone()
    }

    pub fn total_tokens(&self) -> u64 {
        self.usage().values().map(|u| u.prompt_tokens + u.completion_tokens).sum()
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let backend = self
            .backends
            .get(&req.role)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownRole(req.role.as_str().to_string()))?;
        let seq = {
            let mut c = self.counters.lock().expect("counter lock poisoned");
            let slot = c.entry(req.role).or_insert(0);
            *slot += 1;
            *slot - 1
        };
        let _slot = self.slots.acquire();
        let start = Instant::now();
        let mut retries = 0u32;
        let outcome = loop {
            match backend.complete(req, seq) {
                Ok(c) => break Ok(c),
                Err(BackendError::Transient(msg)) if retries < self.retry.max_retries => {
                    retries += 1;
                    tracing::warn!(role = req.role.as_str(), seq, retries, "transient backend failure: {msg}");
                    std::thread::sleep(self.retry.delay(retries));
                }
                Err(BackendError::Transient(msg)) => {
                    break Err(GatewayError::Exhausted { attempts: retries + 1, last: msg });
                }
                Err(e @ BackendError::FixtureMiss { .. }) => break Err(GatewayError::FixtureMiss(e)),
                Err(BackendError::Fatal(msg)) => break Err(GatewayError::Fatal(msg)),
            }
        };
        let latency = start.elapsed();
        let mut usage = self.usage.lock().expect("usage lock poisoned");
        let u = usage.entry(req.role).or_default();
        u.requests += 1;
        u.retries += u64::from(retries);
        match outcome {
            Ok(c) => {
                u.prompt_tokens += c.prompt_tokens;
                u.completion_tokens += c.completion_tokens;
                drop(usage);
                self.log(req, seq, &c, latency, retries);
                Ok(c.text)
            }
            Err(e) => {
                u.failures += 1;
                Err(e)
            }
        }
    }

    fn log(&self, req: &CompletionRequest, seq: u64, c: &Completion, latency: Duration, retries: u32) {
        let Some(t) = &self.transcript else { return };
        let line = TranscriptLine {
            run_id: &self.run_id,
            role: req.role,
            seq,
            prompt_hash: req.prompt_hash(),
            response_hash: sha256_hex(&c.text),
            latency_ms: latency.as_secs_f64() * 1e3,
            prompt_tokens: c.prompt_tokens,
            completion_tokens: c.completion_tokens,
            retries,
        };
        let mut w = t.lock().expect("transcript lock poisoned");
        let written = serde_json::to_writer(&mut *w, &line)
            .map_err(std::io::Error::other)
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush());
        if let Err(e) = written {
            tracing::warn!("transcript write failed: {e}");
        }
    }
}
