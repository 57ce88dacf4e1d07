//! Replay backend for tests: canned responses keyed by prompt hash or by
//! role and request index.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, Completion, CompletionBackend, CompletionRequest, ModelRole};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    PromptHash { prompt_hash: String },
    Sequence { role: ModelRole, index: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub response: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedFixture {
    pub entries: Vec<FixtureEntry>,
}

impl ScriptedFixture {
    pub fn push_sequence(&mut self, role: ModelRole, index: u64, response: impl Into<String>) {
        self.entries.push(FixtureEntry { matcher: Matcher::Sequence { role, index }, response: response.into() });
    }

    pub fn push_prompt(&mut self, prompt: &str, response: impl Into<String>) {
        self.entries.push(FixtureEntry {
            matcher: Matcher::PromptHash { prompt_hash: crate::util::sha256_hex(prompt) },
            response: response.into(),
        });
    }

    /// Reads a JSON array of entries.
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Fatal(format!("fixture {}: {e}", path.display())))?;
        let entries = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("fixture {}: {e}", path.display())))?;
        Ok(ScriptedFixture { entries })
    }

    /// A prompt-hash entry wins over a sequence entry; the first match of
    /// each kind is used.
    pub fn lookup(&self, role: ModelRole, seq: u64, prompt_hash: &str) -> Option<&str> {
        let by_hash = self.entries.iter().find(|e| {
            matches!(&e.matcher, Matcher::PromptHash { prompt_hash: h } if h == prompt_hash)
        });
        by_hash
            .or_else(|| {
                self.entries.iter().find(|e| e.matcher == Matcher::Sequence { role, index: seq })
            })
            .map(|e| e.response.as_str())
    }
}

pub struct ScriptedBackend {
    fixture: ScriptedFixture,
    // Serializes replay so concurrent callers observe one fixed order.
    gate: Mutex<()>,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptedFixture) -> Self {
        ScriptedBackend { fixture, gate: Mutex::new(()) }
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest, seq: u64) -> Result<Completion, BackendError> {
        let _g = self.gate.lock().expect("scripted gate poisoned");
        let hash = req.prompt_hash();
        match self.fixture.lookup(req.role, seq, &hash) {
            Some(text) => Ok(Completion::estimated(&req.prompt, text.to_string())),
            None => Err(BackendError::FixtureMiss { role: req.role.as_str().into(), seq, prompt_hash: hash }),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
