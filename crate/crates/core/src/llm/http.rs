//! OpenAI-compatible chat-completions client. Local inference servers that
//! speak the same protocol use this client too.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, Completion, CompletionBackend, CompletionRequest, ModelRole};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub model: String,
    pub base_url: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    /// Per-request deadline covering connect, send and read.
    pub timeout_secs: u64,
}

impl HttpConfig {
    /// Reads `SQLFORGE_<ROLE>_BASE_URL` / `SQLFORGE_<ROLE>_API_KEY`, falling
    /// back to `OPENAI_BASE_URL` / `OPENAI_API_KEY`.
    pub fn from_env(role: ModelRole, model: &str, timeout_secs: u64) -> Self {
        let var = |suffix: &str| {
            let role_var = format!("SQLFORGE_{}_{suffix}", role.as_str().to_ascii_uppercase());
            std::env::var(role_var).or_else(|_| std::env::var(format!("OPENAI_{suffix}"))).ok()
        };
        HttpConfig {
            model: model.to_string(),
            base_url: var("BASE_URL").unwrap_or_else(|| DEFAULT_BASE_URL.to_string()),
            api_key: var("API_KEY"),
            timeout_secs,
        }
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .map_err(|e| BackendError::Fatal(format!("http client: {e}")))?;
        Ok(HttpBackend { cfg, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest, _seq: u64) -> Result<Completion, BackendError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        });
        let mut call = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.cfg.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| BackendError::Transient(format!("transport: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transient(format!("reading body: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}: {}", snippet(&text))));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}: {}", snippet(&text))));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Fatal(format!("malformed response: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("response has no message content".into()))?;
        Ok(match parsed.usage {
            Some(u) => Completion { text: content, prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens },
            None => Completion::estimated(&req.prompt, content),
        })
    }

    fn name(&self) -> &str {
        &self.cfg.model
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}
