//! Chat-completion HTTP backend.
//!
//! The request is a JSON body `{model, messages: [{role: "user", content}], ...params}`
//! posted to `endpoint_url`. Header names, the auth value template and the
//! JSON pointer to the reply text are configurable, which is enough to talk
//! to OpenAI-style endpoints as well as vendors with their own header scheme.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_generated_question, Agent, AgentConfig, AgentError, AnswerOutput, Generation, PromptTemplates};
use crate::domain::{ModelId, QuestionRecord, TopicRef};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpOptions {
    pub auth_header: String,
    /// `{api_key}` is replaced with the key read from `api_key_env`.
    pub auth_value_template: String,
    pub extra_headers: BTreeMap<String, String>,
    /// JSON pointer to the reply text in the response body.
    pub response_pointer: String,
    /// Model name sent to the API when it differs from `model_id`.
    pub api_model: Option<String>,
    pub retry_base_ms: u64,
}

impl Default for HttpOptions {
    fn default() -> Self {
        Self {
            auth_header: "Authorization".into(),
            auth_value_template: "Bearer {api_key}".into(),
            extra_headers: BTreeMap::new(),
            response_pointer: "/choices/0/message/content".into(),
            api_model: None,
            retry_base_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout,
    Status { code: u16, body: String },
    Network(String),
    Decode(String),
}

impl TransportFailure {
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Timeout | Self::Network(_) => true,
            Self::Status { code, .. } => *code == 429 || *code >= 500,
            Self::Decode(_) => false,
        }
    }
}

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Timeout => f.write_str("request timed out"),
            Self::Status { code, body } => write!(f, "HTTP {code}: {}", body.chars().take(200).collect::<String>()),
            Self::Network(m) => write!(f, "network error: {m}"),
            Self::Decode(m) => write!(f, "bad response: {m}"),
        }
    }
}

/// Sends one request and returns the decoded JSON body.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn post(&self, request: &ChatRequest, timeout: Duration) -> Result<Value, TransportFailure>;
}

#[derive(Debug, Clone, Default)]
pub struct ReqwestTransport {
    client: reqwest::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl Transport for ReqwestTransport {
    async fn post(&self, request: &ChatRequest, timeout: Duration) -> Result<Value, TransportFailure> {
        let mut builder = self.client.post(&request.url).timeout(timeout).json(&request.body);
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                TransportFailure::Timeout
            } else {
                TransportFailure::Network(e.to_string())
            }
        };
        let resp = builder.send().await.map_err(classify)?;
        let status = resp.status();
        let text = resp.text().await.map_err(classify)?;
        if !status.is_success() {
            return Err(TransportFailure::Status {
                code: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| TransportFailure::Decode(e.to_string()))
    }
}

pub struct HttpChatAgent {
    config: AgentConfig,
    api_key: String,
    prompts: Arc<PromptTemplates>,
    transport: Arc<dyn Transport>,
}

impl HttpChatAgent {
    pub fn new(
        config: AgentConfig,
        prompts: Arc<PromptTemplates>,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, AgentError> {
        let var = config.api_key_env.clone().unwrap_or_default();
        let api_key = std::env::var(&var).map_err(|_| AgentError::MissingApiKey {
            model: config.model_id.clone(),
            var: var.clone(),
        })?;
        Ok(Self {
            config,
            api_key,
            prompts,
            transport,
        })
    }

    /// The full request for a single-turn prompt. No history is ever carried.
    pub fn build_request(&self, prompt: &str) -> ChatRequest {
        let opts = &self.config.http;
        let model = opts
            .api_model
            .clone()
            .unwrap_or_else(|| self.config.model_id.to_string());
        let mut body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Value::Object(map) = &mut body {
            for (k, v) in &self.config.request_params {
                map.insert(k.clone(), v.clone());
            }
        }
        let mut headers = vec![(
            opts.auth_header.clone(),
            opts.auth_value_template.replace("{api_key}", &self.api_key),
        )];
        headers.extend(opts.extra_headers.iter().map(|(k, v)| (k.clone(), v.clone())));
        ChatRequest {
            url: self.config.endpoint_url.clone().unwrap_or_default(),
            headers,
            body,
        }
    }

    async fn complete(&self, prompt: &str) -> Result<String, AgentError> {
        let request = self.build_request(prompt);
        let max_attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let failure = match self.transport.post(&request, self.config.timeout()).await {
                Ok(body) => match body.pointer(&self.config.http.response_pointer).and_then(Value::as_str) {
                    Some(text) => return Ok(text.to_string()),
                    None => TransportFailure::Decode(format!(
                        "no string at {} in response",
                        self.config.http.response_pointer
                    )),
                },
                Err(f) => f,
            };
            if !failure.is_retryable() || attempt >= max_attempts {
                return Err(AgentError::Transport {
                    model: self.config.model_id.clone(),
                    attempts: attempt,
                    message: failure.to_string(),
                });
            }
            tracing::warn!(model = %self.config.model_id, attempt, %failure, "retrying request");
            tokio::time::sleep(backoff(self.config.http.retry_base_ms, attempt)).await;
        }
    }
}

/// Exponential backoff with ±50% jitter.
fn backoff(base_ms: u64, attempt: u32) -> Duration {
    let exp = base_ms.saturating_mul(1u64 << (attempt - 1).min(16));
    let jitter: f64 = rand::rng().random_range(0.5..1.5);
    Duration::from_millis((exp as f64 * jitter) as u64)
}

#[async_trait]
impl Agent for HttpChatAgent {
    fn model_id(&self) -> &ModelId {
        &self.config.model_id
    }

    async fn generate(&self, topic: &TopicRef) -> Result<Generation, AgentError> {
        let raw = self.complete(&self.prompts.render_generation_prompt(topic)).await?;
        match parse_generated_question(&raw) {
            Ok(question) => Ok(Generation { question, raw }),
            Err(source) => Err(AgentError::Parse {
                model: self.config.model_id.clone(),
                raw,
                source,
            }),
        }
    }

    async fn answer(&self, question: &QuestionRecord) -> Result<AnswerOutput, AgentError> {
        let raw = self.complete(&self.prompts.render_answering_prompt(question)).await?;
        AnswerOutput::from_raw(&self.config.model_id, raw)
    }
}
