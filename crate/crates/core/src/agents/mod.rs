//! Question-generating and answering backends.
//!
//! Three backends share the [`Agent`] trait: a chat-completion HTTP client,
//! a scripted replayer for reproducible tests, and a stochastic simulator
//! with a tunable correlated-error model.

mod http;
mod parse;
mod prompts;
mod scripted;
mod stochastic;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnswerOption, ModelId, QuestionRecord, TopicRef};

pub use http::{ChatRequest, HttpChatAgent, HttpOptions, ReqwestTransport, Transport, TransportFailure};
pub use parse::{
    format_generated_question, justification_text, parse_generated_question, parse_selected_option, ExtractionRule,
    GeneratedQuestion, GenerationParseError, NoOptionFound,
};
pub use prompts::{
    PromptTemplates, TemplateError, CONCEPT_PLACEHOLDER, DEFAULT_ANSWERING_TEMPLATE, DEFAULT_GENERATION_TEMPLATE,
    GENERATION_FORMAT_INSTRUCTION, TOPIC_PLACEHOLDER,
};
pub use scripted::{ScriptedAgent, ScriptedSpec};
pub use stochastic::{StochasticAgent, StochasticAgentParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Scripted,
    Stochastic,
}

fn default_timeout_ms() -> u64 {
    120_000
}

fn default_max_retries() -> u32 {
    3
}

/// One model's backend configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub model_id: ModelId,
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Sent verbatim in the request body. Empty means vendor defaults.
    #[serde(default)]
    pub request_params: BTreeMap<String, serde_json::Value>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub http: HttpOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scripted: Option<ScriptedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<StochasticAgentParams>,
}

impl AgentConfig {
    fn base(model_id: impl Into<String>, backend: BackendKind) -> Self {
        Self {
            model_id: ModelId::new(model_id),
            backend,
            endpoint_url: None,
            api_key_env: None,
            request_params: BTreeMap::new(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            http: HttpOptions::default(),
            scripted: None,
            stochastic: None,
        }
    }

    pub fn scripted(model_id: impl Into<String>, spec: ScriptedSpec) -> Self {
        Self {
            scripted: Some(spec),
            ..Self::base(model_id, BackendKind::Scripted)
        }
    }

    pub fn stochastic(model_id: impl Into<String>, params: StochasticAgentParams) -> Self {
        Self {
            stochastic: Some(params),
            ..Self::base(model_id, BackendKind::Stochastic)
        }
    }

    pub fn http(model_id: impl Into<String>, endpoint_url: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        Self {
            endpoint_url: Some(endpoint_url.into()),
            api_key_env: Some(api_key_env.into()),
            ..Self::base(model_id, BackendKind::HttpChat)
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Every violated rule, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let id = &self.model_id;
        let mut v = Vec::new();
        if id.as_str().trim().is_empty() {
            v.push("model_id is empty".to_string());
        }
        if self.timeout_ms == 0 {
            v.push(format!("model '{id}': timeout_ms must be positive"));
        }
        match self.backend {
            BackendKind::HttpChat => {
                if self.endpoint_url.as_deref().is_none_or(|u| u.trim().is_empty()) {
                    v.push(format!("model '{id}': http_chat backend requires endpoint_url"));
                } else if let Err(e) = reqwest::Url::parse(self.endpoint_url.as_deref().unwrap_or_default()) {
                    v.push(format!("model '{id}': endpoint_url is not a valid URL ({e})"));
                }
                if self.api_key_env.as_deref().is_none_or(|k| k.trim().is_empty()) {
                    v.push(format!("model '{id}': http_chat backend requires api_key_env"));
                }
                if self.scripted.is_some() || self.stochastic.is_some() {
                    v.push(format!(
                        "model '{id}': http_chat backend takes no scripted/stochastic section"
                    ));
                }
            }
            BackendKind::Scripted | BackendKind::Stochastic => {
                if self.endpoint_url.is_some() {
                    v.push(format!("model '{id}': endpoint_url is only allowed for http_chat"));
                }
                if self.api_key_env.is_some() {
                    v.push(format!("model '{id}': api_key_env is only allowed for http_chat"));
                }
            }
        }
        match (self.backend, &self.scripted, &self.stochastic) {
            (BackendKind::Scripted, None, _) => {
                v.push(format!("model '{id}': scripted backend requires a [scripted] section"))
            }
            (BackendKind::Scripted, _, Some(_)) => {
                v.push(format!("model '{id}': scripted backend takes no [stochastic] section"))
            }
            (BackendKind::Stochastic, _, None) => v.push(format!(
                "model '{id}': stochastic backend requires a [stochastic] section"
            )),
            (BackendKind::Stochastic, Some(_), _) => {
                v.push(format!("model '{id}': stochastic backend takes no [scripted] section"))
            }
            _ => {}
        }
        if let Some(p) = &self.stochastic {
            v.extend(p.violations().into_iter().map(|m| format!("model '{id}': {m}")));
        }
        v
    }
}

/// Generator output with the text it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub question: GeneratedQuestion,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerOutput {
    pub selected: AnswerOption,
    pub justification: String,
    pub raw: String,
    pub rule: ExtractionRule,
}

impl AnswerOutput {
    pub fn from_raw(model: &ModelId, raw: String) -> Result<Self, AgentError> {
        let (selected, rule) = parse_selected_option(&raw).map_err(|_| AgentError::NoOption {
            model: model.clone(),
            raw: raw.clone(),
        })?;
        Ok(Self {
            selected,
            justification: justification_text(&raw, rule),
            raw,
            rule,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("model '{model}': transport failed after {attempts} attempt(s): {message}")]
    Transport {
        model: ModelId,
        attempts: u32,
        message: String,
    },
    #[error("model '{model}': unparseable question ({source})")]
    Parse {
        model: ModelId,
        raw: String,
        #[source]
        source: GenerationParseError,
    },
    #[error("model '{model}': no answer option found in response")]
    NoOption { model: ModelId, raw: String },
    #[error("model '{model}' generated question {question} and may not answer it")]
    SelfAnswer { model: ModelId, question: String },
    #[error("model '{model}': environment variable {var} is not set")]
    MissingApiKey { model: ModelId, var: String },
    #[error("model '{model}': invalid configuration: {message}")]
    Config { model: ModelId, message: String },
}

impl AgentError {
    /// Parse failures of a generation are recoverable by regenerating.
    pub fn is_generation_parse(&self) -> bool {
        matches!(self, Self::Parse { .. })
    }
}

#[async_trait]
pub trait Agent: Send + Sync {
    fn model_id(&self) -> &ModelId;

    async fn generate(&self, topic: &TopicRef) -> Result<Generation, AgentError>;

    async fn answer(&self, question: &QuestionRecord) -> Result<AnswerOutput, AgentError>;
}

/// Asks `agent` for a new question on `topic`.
pub async fn generate_question(agent: &dyn Agent, topic: &TopicRef) -> Result<Generation, AgentError> {
    agent.generate(topic).await
}

/// Asks `agent` to answer `question`; the question's own generator is refused.
pub async fn answer_question(agent: &dyn Agent, question: &QuestionRecord) -> Result<AnswerOutput, AgentError> {
    if agent.model_id() == &question.generator_model {
        return Err(AgentError::SelfAnswer {
            model: agent.model_id().clone(),
            question: question.question_id.to_string(),
        });
    }
    agent.answer(question).await
}

/// Builds a backend. HTTP agents resolve their API key here, so a missing
/// variable fails before any request is made.
pub fn build_agent(
    config: &AgentConfig,
    prompts: Arc<PromptTemplates>,
    transport: Arc<dyn Transport>,
) -> Result<Arc<dyn Agent>, AgentError> {
    let problems = config.violations();
    if !problems.is_empty() {
        return Err(AgentError::Config {
            model: config.model_id.clone(),
            message: problems.join("; "),
        });
    }
    Ok(match config.backend {
        BackendKind::HttpChat => Arc::new(HttpChatAgent::new(config.clone(), prompts, transport)?),
        BackendKind::Scripted => Arc::new(ScriptedAgent::new(
            config.model_id.clone(),
            config.scripted.clone().unwrap_or_default(),
            config.max_retries,
        )),
        BackendKind::Stochastic => Arc::new(StochasticAgent::new(
            config.model_id.clone(),
            config.stochastic.clone().expect("validated"),
        )),
    })
}
