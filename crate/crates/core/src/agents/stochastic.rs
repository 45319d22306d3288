//! Simulated agents with a correlated-error model.
//!
//! For each question there is one shared "population" draw: a uniform `u`
//! and a wrong option `w`, both derived from the question id alone. An agent
//! copies the population outcome (`correct` if `u < accuracy`, else `w`)
//! with probability `correlation`, and otherwise makes its own independent
//! draw (correct with probability `accuracy`, else a uniform wrong option).
//! Each agent's marginal accuracy is therefore `accuracy` regardless of
//! `correlation`.

use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    format_generated_question, parse_generated_question, Agent, AgentError, AnswerOutput, GeneratedQuestion, Generation,
};
use crate::domain::{AnswerOption, ModelId, OptionSet, QuestionRecord, TopicRef};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticAgentParams {
    /// Probability of selecting the generator's intended answer.
    pub accuracy: f64,
    /// Probability of copying the shared population draw.
    pub correlation: f64,
    pub rng_seed: u64,
}

impl StochasticAgentParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.accuracy) {
            v.push(format!("accuracy must be in [0, 1], got {}", self.accuracy));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            v.push(format!("correlation must be in [0, 1], got {}", self.correlation));
        }
        v
    }
}

fn rng_for(seed: u64, tag: &str, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, key))
}

fn wrong_option(rng: &mut ChaCha8Rng, correct: AnswerOption) -> AnswerOption {
    let k = rng.random_range(0..3usize);
    let others: Vec<_> = AnswerOption::ALL.into_iter().filter(|&o| o != correct).collect();
    others[k]
}

pub struct StochasticAgent {
    model_id: ModelId,
    params: StochasticAgentParams,
    generated: AtomicU64,
}

impl StochasticAgent {
    pub fn new(model_id: ModelId, params: StochasticAgentParams) -> Self {
        Self {
            model_id,
            params,
            generated: AtomicU64::new(0),
        }
    }

    /// Pure function of (params, question id, generator answer).
    pub fn choose(&self, question_id: &str, correct: AnswerOption) -> AnswerOption {
        let mut shared = rng_for(0, "population", question_id);
        let shared_u: f64 = shared.random();
        let shared_wrong = wrong_option(&mut shared, correct);

        let mut own = rng_for(self.params.rng_seed, "answer", question_id);
        let copy_u: f64 = own.random();
        let own_u: f64 = own.random();
        let own_wrong = wrong_option(&mut own, correct);

        let accuracy = self.params.accuracy;
        if copy_u < self.params.correlation {
            if shared_u < accuracy {
                correct
            } else {
                shared_wrong
            }
        } else if own_u < accuracy {
            correct
        } else {
            own_wrong
        }
    }
}

#[async_trait]
impl Agent for StochasticAgent {
    fn model_id(&self) -> &ModelId {
        &self.model_id
    }

    async fn generate(&self, topic: &TopicRef) -> Result<Generation, AgentError> {
        let k = self.generated.fetch_add(1, Ordering::SeqCst);
        let mut rng = rng_for(self.params.rng_seed, "generate", &k.to_string());
        let correct = AnswerOption::from_index(rng.random_range(0..4)).expect("index < 4");
        let label = |o: AnswerOption| format!("Simulated option {o} on {}", topic.subtopic);
        let q = GeneratedQuestion {
            stem: format!(
                "Simulated question #{k} in the field of {}, focusing on {}?",
                topic.topic, topic.subtopic
            ),
            options: OptionSet::new(
                label(AnswerOption::A),
                label(AnswerOption::B),
                label(AnswerOption::C),
                label(AnswerOption::D),
            ),
            correct,
            explanation: format!("Option {correct} is the intended answer."),
        };
        let raw = format_generated_question(&q);
        let question = parse_generated_question(&raw).map_err(|source| AgentError::Parse {
            model: self.model_id.clone(),
            raw: raw.clone(),
            source,
        })?;
        Ok(Generation { question, raw })
    }

    async fn answer(&self, question: &QuestionRecord) -> Result<AnswerOutput, AgentError> {
        let selected = self.choose(question.question_id.as_str(), question.generator_answer);
        let raw = format!("Answer: {selected}\nSimulated justification from {}.", self.model_id);
        AnswerOutput::from_raw(&self.model_id, raw)
    }
}
