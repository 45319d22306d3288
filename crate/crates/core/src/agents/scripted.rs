//! Replays canned model output. Used for reproducible end-to-end runs.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{parse_generated_question, Agent, AgentError, AnswerOutput, Generation};
use crate::domain::{ModelId, QuestionRecord, TopicRef};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedSpec {
    /// Raw generator outputs, replayed in order and cycled.
    pub generations: Vec<String>,
    /// Raw answer outputs, replayed in order and cycled.
    pub answers: Vec<String>,
    /// Overrides `answers` for specific question ids.
    pub answers_by_question: BTreeMap<String, String>,
    /// After this many calls every further call fails as a transport error.
    pub fail_after_calls: Option<u64>,
}

pub struct ScriptedAgent {
    model_id: ModelId,
    spec: ScriptedSpec,
    max_retries: u32,
    calls: AtomicU64,
    generations: AtomicU64,
    answers: AtomicU64,
}

impl ScriptedAgent {
    pub fn new(model_id: ModelId, spec: ScriptedSpec, max_retries: u32) -> Self {
        Self {
            model_id,
            spec,
            max_retries,
            calls: AtomicU64::new(0),
            generations: AtomicU64::new(0),
            answers: AtomicU64::new(0),
        }
    }

    fn check_budget(&self) -> Result<(), AgentError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        match self.spec.fail_after_calls {
            Some(limit) if n >= limit => Err(AgentError::Transport {
                model: self.model_id.clone(),
                attempts: self.max_retries + 1,
                message: format!("scripted failure after {limit} call(s)"),
            }),
            _ => Ok(()),
        }
    }

    fn script_error(&self, what: &str) -> AgentError {
        AgentError::Config {
            model: self.model_id.clone(),
            message: format!("script has no {what}"),
        }
    }
}

fn cycle(items: &[String], counter: &AtomicU64) -> Option<String> {
    if items.is_empty() {
        return None;
    }
    let k = counter.fetch_add(1, Ordering::SeqCst) as usize;
    Some(items[k % items.len()].clone())
}

#[async_trait]
impl Agent for ScriptedAgent {
    fn model_id(&self) -> &ModelId {
        &self.model_id
    }

    async fn generate(&self, _topic: &TopicRef) -> Result<Generation, AgentError> {
        self.check_budget()?;
        let raw = cycle(&self.spec.generations, &self.generations).ok_or_else(|| self.script_error("generations"))?;
        match parse_generated_question(&raw) {
            Ok(question) => Ok(Generation { question, raw }),
            Err(source) => Err(AgentError::Parse {
                model: self.model_id.clone(),
                raw,
                source,
            }),
        }
    }

    async fn answer(&self, question: &QuestionRecord) -> Result<AnswerOutput, AgentError> {
        self.check_budget()?;
        let raw = match self.spec.answers_by_question.get(question.question_id.as_str()) {
            Some(r) => r.clone(),
            None => cycle(&self.spec.answers, &self.answers).ok_or_else(|| self.script_error("answers"))?,
        };
        AnswerOutput::from_raw(&self.model_id, raw)
    }
}
