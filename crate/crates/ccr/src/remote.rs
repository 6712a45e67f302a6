//! Remote language-model backend speaking the chat-completions protocol.
//!
//! [`RemoteReasoner`] sends each rendered prompt as a single user message
//! and returns the first choice's content. Design points:
//!
//! - **Credentials stay out of artifacts**: the config names an environment
//!   variable; the key is read at construction and never serialized.
//! - **Retries with jittered exponential backoff** on transport errors,
//!   `429`, and `5xx`; other client errors fail fast.
//! - **Chain-of-thought wrapping**: constructed with exemplars, the
//!   reasoner wraps every outgoing prompt via [`wrap_cot`].
//!
//! Concurrency and resume live in [`crate::reasoner::run_batch`]; this
//! client is one blocking call per question and is safe to share across
//! worker threads.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reasoner::{Answer, Reasoner, ReasonerError, Which};
use crate::task::{wrap_cot, CotExemplar, QueryInstance};

// ── Configuration ───────────────────────────────────────────────────────────

/// Where and how to reach the model endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL, e.g. `https://api.example.com/v1`; the chat-completions
    /// path is appended.
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    512
}
fn default_api_key_env() -> String {
    "CCR_API_KEY".to_string()
}
fn default_timeout_s() -> u64 {
    60
}
fn default_max_retries() -> u32 {
    4
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            api_key_env: default_api_key_env(),
            timeout_s: default_timeout_s(),
            max_retries: default_max_retries(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("credential variable {var} is not set in the environment")]
    MissingCredential { var: String },
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion payload: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts; last error: {last}")]
    Exhausted { attempts: u32, last: String },
}

// ── Wire types ──────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

// ── Client ──────────────────────────────────────────────────────────────────

/// A chat-completions backend implementing [`Reasoner`].
pub struct RemoteReasoner {
    client: reqwest::blocking::Client,
    cfg: EndpointConfig,
    key: String,
    exemplars: Vec<CotExemplar>,
}

impl RemoteReasoner {
    /// Build the client, reading the bearer token from the environment
    /// variable named by the config. Pass exemplars to enable
    /// chain-of-thought wrapping of every prompt.
    pub fn new(cfg: EndpointConfig, exemplars: Vec<CotExemplar>) -> Result<Self, RemoteError> {
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| RemoteError::MissingCredential { var: cfg.api_key_env.clone() })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_s))
            .build()?;
        Ok(RemoteReasoner { client, cfg, key, exemplars })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    /// One completion with retries; returns the text and total elapsed
    /// milliseconds (including retries — that is the latency the run paid).
    pub fn complete(&self, prompt: &str) -> Result<(String, u64), RemoteError> {
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let backoff = Duration::from_millis(
                    500u64.saturating_mul(1 << (attempt - 1).min(6))
                        + rand::random_range(0..250),
                );
                std::thread::sleep(backoff);
            }
            match self.try_once(prompt) {
                Ok(text) => {
                    let ms = started.elapsed().as_millis() as u64;
                    return Ok((text, ms));
                }
                Err(e) if retryable(&e) => last = e.to_string(),
                Err(e) => return Err(e),
            }
        }
        Err(RemoteError::Exhausted { attempts: self.cfg.max_retries + 1, last })
    }

    fn try_once(&self, prompt: &str) -> Result<String, RemoteError> {
        let request = ChatRequest {
            model: &self.cfg.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        };
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.key)
            .json(&request)
            .send()?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(RemoteError::Status {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let payload: ChatResponse = response
            .json()
            .map_err(|e| RemoteError::Malformed(e.to_string()))?;
        payload
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| RemoteError::Malformed("empty choices array".into()))
    }
}

fn retryable(err: &RemoteError) -> bool {
    match err {
        RemoteError::Transport(_) => true,
        RemoteError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl Reasoner for RemoteReasoner {
    fn answer(
        &self,
        query: &QueryInstance,
        which: Which,
        _replicate: u64,
    ) -> Result<Answer, ReasonerError> {
        let question = match which {
            Which::Factual => &query.factual,
            Which::Counterfactual => &query.counterfactual,
        };
        let prompt = wrap_cot(question, &self.exemplars);
        let (text, latency_ms) = self
            .complete(&prompt)
            .map_err(|e| ReasonerError::Backend(e.to_string()))?;
        Ok(Answer { text, latency_ms })
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────
