//! Chat-model clients: an OpenAI-compatible HTTP client and a scripted replay double.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingSecret(String),
    #[error("model endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error talking to the model endpoint: {0}")]
    Transport(String),
    #[error("unexpected response from the model endpoint: {0}")]
    BadResponse(String),
    #[error("scripted client `{0}` has no responses left")]
    ScriptExhausted(String),
}

/// One completion with optional provider usage counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    #[serde(default)]
    pub input_tokens: Option<u64>,
    #[serde(default)]
    pub output_tokens: Option<u64>,
    /// Seconds the model call took.
    #[serde(default)]
    pub elapsed_s: f64,
}

impl ChatReply {
    pub fn text(text: impl Into<String>) -> Self {
        ChatReply {
            text: text.into(),
            input_tokens: None,
            output_tokens: None,
            elapsed_s: 0.0,
        }
    }
}

/// A single-shot chat model.
pub trait ChatModelClient: Send + Sync {
    fn model_name(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<ChatReply, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenAiConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_attempts() -> u32 {
    4
}

fn default_backoff_ms() -> u64 {
    1000
}

fn default_timeout_s() -> f64 {
    300.0
}

/// Blocking client for `POST {endpoint}/chat/completions`.
pub struct OpenAiClient {
    config: OpenAiConfig,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl std::fmt::Debug for OpenAiClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiClient")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .field("api_key", &"[redacted]")
            .finish()
    }
}

impl OpenAiClient {
    /// Reads the key from the configured environment variable.
    pub fn from_env(config: OpenAiConfig) -> Result<Self, ClientError> {
        let api_key =
            std::env::var(&config.api_key_env).map_err(|_| ClientError::MissingSecret(config.api_key_env.clone()))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: OpenAiConfig, api_key: String) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s.max(0.001)))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(OpenAiClient { config, api_key, http })
    }

    fn redact(&self, s: &str) -> String {
        if self.api_key.is_empty() {
            s.to_string()
        } else {
            s.replace(&self.api_key, "[redacted]")
        }
    }

    fn attempt(&self, body: &Value) -> Result<Value, (bool, ClientError)> {
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let resp = self
            .http
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| (true, ClientError::Transport(self.redact(&e.to_string()))))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| (true, ClientError::Transport(self.redact(&e.to_string()))))?;
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let mut body = self.redact(&text);
            body.truncate(body.floor_char_boundary(500));
            return Err((retryable, ClientError::Http { status: status.as_u16(), body }));
        }
        serde_json::from_str(&text).map_err(|e| (false, ClientError::BadResponse(e.to_string())))
    }
}

impl ChatModelClient for OpenAiClient {
    fn model_name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &str) -> Result<ChatReply, ClientError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = self.config.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let start = Instant::now();
        let attempts = self.config.max_attempts.max(1);
        let mut last_err = None;
        for i in 0..attempts {
            if i > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << (i - 1).min(16))));
            }
            match self.attempt(&body) {
                Ok(v) => {
                    let text = v["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| ClientError::BadResponse("missing choices[0].message.content".into()))?
                        .to_string();
                    return Ok(ChatReply {
                        text,
                        input_tokens: v["usage"]["prompt_tokens"].as_u64(),
                        output_tokens: v["usage"]["completion_tokens"].as_u64(),
                        elapsed_s: start.elapsed().as_secs_f64(),
                    });
                }
                Err((retryable, e)) => {
                    tracing::warn!(attempt = i + 1, error = %e, "model call failed");
                    if !retryable {
                        return Err(e);
                    }
                    last_err = Some(e);
                }
            }
        }
        Err(last_err.expect("at least one attempt ran"))
    }
}

/// Replays canned replies in order and records every prompt it receives.
#[derive(Debug)]
pub struct ScriptedClient {
    model_name: String,
    replies: Mutex<VecDeque<ChatReply>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedClient {
    pub fn new(model_name: impl Into<String>, replies: impl IntoIterator<Item = ChatReply>) -> Self {
        ScriptedClient {
            model_name: model_name.into(),
            replies: Mutex::new(replies.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn from_texts<S: Into<String>>(model_name: impl Into<String>, texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(model_name, texts.into_iter().map(ChatReply::text))
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("script poisoned").len()
    }
}

impl ChatModelClient for ScriptedClient {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn complete(&self, prompt: &str) -> Result<ChatReply, ClientError> {
        self.prompts.lock().expect("prompt log poisoned").push(prompt.to_string());
        self.replies
            .lock()
            .expect("script poisoned")
            .pop_front()
            .ok_or_else(|| ClientError::ScriptExhausted(self.model_name.clone()))
    }
}
