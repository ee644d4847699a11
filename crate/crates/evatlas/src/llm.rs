//! Chat-completion clients for the LLM topic backend and the run that wraps
//! prompt, request and reply parsing.

use std::time::Duration;

use async_trait::async_trait;
use evatlas_core::topic::TopicRun;
use evatlas_core::{build_topic_prompt, parse_topic_response, Corpus, RunConfig};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bundle::RunError;
use crate::topic_error_kind;

pub const KEY_VAR: &str = "EVATLAS_LLM_KEY";
pub const URL_VAR: &str = "EVATLAS_LLM_URL";
pub const MODEL_VAR: &str = "EVATLAS_LLM_MODEL";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("LLM backend not configured: {0}")]
    Unavailable(String),
    #[error("LLM request failed: {0}")]
    Request(String),
}

impl LlmError {
    fn into_run_error(self) -> RunError {
        let kind = match self {
            LlmError::Unavailable(_) => "LlmUnavailable",
            LlmError::Request(_) => "LlmRequest",
        };
        RunError::new(kind, self.to_string())
    }
}

#[async_trait]
pub trait ChatClient: Send + Sync {
    /// Sends one user message and returns the text of the reply.
    async fn complete(&self, prompt: &str, config: &RunConfig) -> Result<String, LlmError>;
}

/// Client for an OpenAI-style `chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    http: reqwest::Client,
    url: String,
    api_key: String,
    default_model: String,
}

impl HttpChatClient {
    pub fn new(url: &str, api_key: &str, default_model: &str, timeout: Duration) -> Result<Self, LlmError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        Ok(Self {
            http,
            url: url.into(),
            api_key: api_key.into(),
            default_model: default_model.into(),
        })
    }

    /// Reads the endpoint, key and default model from the environment.
    pub fn from_env() -> Result<Self, LlmError> {
        let var = |name: &str| {
            std::env::var(name)
                .ok()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| LlmError::Unavailable(format!("{name} is not set")))
        };
        let key = var(KEY_VAR)?;
        let url = var(URL_VAR)?;
        let model = std::env::var(MODEL_VAR).unwrap_or_default();
        Self::new(&url, &key, &model, DEFAULT_TIMEOUT)
    }
}

#[async_trait]
impl ChatClient for HttpChatClient {
    async fn complete(&self, prompt: &str, config: &RunConfig) -> Result<String, LlmError> {
        let model = config.model.as_deref().unwrap_or(&self.default_model);
        if model.is_empty() {
            return Err(LlmError::Unavailable(format!(
                "no model in the run config and {MODEL_VAR} is not set"
            )));
        }
        let body = json!({
            "model": model,
            "temperature": config.temperature,
            "seed": config.seed,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let response = self
            .http
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| LlmError::Request(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| LlmError::Request(e.to_string()))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(500).collect();
            return Err(LlmError::Request(format!("HTTP {status}: {snippet}")));
        }
        reply_text(&text).ok_or_else(|| LlmError::Request("reply has no message content".into()))
    }
}

/// Message text from a chat-completion response body; also accepts the
/// `content: [{type: "text", text}]` shape.
pub fn reply_text(body: &str) -> Option<String> {
    let value: Value = serde_json::from_str(body).ok()?;
    if let Some(s) = value.pointer("/choices/0/message/content").and_then(Value::as_str) {
        return Some(s.to_owned());
    }
    let parts = value.get("content")?.as_array()?;
    let text: String = parts
        .iter()
        .filter_map(|p| p.get("text").and_then(Value::as_str))
        .collect();
    (!text.is_empty()).then_some(text)
}

/// Replays a recorded reply; used for offline runs and tests.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    reply: String,
}

impl ReplayClient {
    pub fn new(reply: impl Into<String>) -> Self {
        Self { reply: reply.into() }
    }
}

#[async_trait]
impl ChatClient for ReplayClient {
    async fn complete(&self, _prompt: &str, _config: &RunConfig) -> Result<String, LlmError> {
        Ok(self.reply.clone())
    }
}

/// Result of a finished run, with the raw reply when one came back.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: Result<TopicRun, RunError>,
    pub raw_reply: Option<String>,
}

/// Builds the prompt, calls the model and parses the reply, assigning
/// studies locally when the reply leaves any unplaced.
pub async fn run_llm(client: &dyn ChatClient, corpus: &Corpus, config: &RunConfig) -> RunOutcome {
    let topic_err = |e: evatlas_core::TopicError| RunError::new(topic_error_kind(&e), e.to_string());
    let prompt = match build_topic_prompt(corpus, config) {
        Ok(p) => p,
        Err(e) => {
            return RunOutcome {
                result: Err(topic_err(e)),
                raw_reply: None,
            }
        }
    };
    let reply = match client.complete(&prompt, config).await {
        Ok(r) => r,
        Err(e) => {
            return RunOutcome {
                result: Err(e.into_run_error()),
                raw_reply: None,
            }
        }
    };
    let result = parse_topic_response(&reply, corpus, config)
        .map(|parsed| parsed.complete(corpus, config))
        .map_err(topic_err);
    RunOutcome {
        result,
        raw_reply: Some(reply),
    }
}
