//! Core records: questions, answers and the per-experiment dataset.

mod jsonl;
mod topics;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jsonl::{read_dataset, write_dataset, DatasetError, DatasetWriter, SCHEMA_VERSION};
pub use topics::{load_topic_map, TopicMap, TopicMapError, DEFAULT_TOPIC_MAP};

/// One of the four labelled answer options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerOption {
    A,
    B,
    C,
    D,
}

impl AnswerOption {
    pub const ALL: [AnswerOption; 4] = [Self::A, Self::B, Self::C, Self::D];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'A' => Some(Self::A),
            'B' => Some(Self::B),
            'C' => Some(Self::C),
            'D' => Some(Self::D),
            _ => None,
        }
    }
}

impl fmt::Display for AnswerOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for AnswerOption {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_letter(c).ok_or_else(|| DomainError::InvalidOption(s.to_string())),
            _ => Err(DomainError::InvalidOption(s.to_string())),
        }
    }
}

/// Identifier of a model taking part in an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub String);

impl ModelId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModelId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Creation-time identifier of a question. Never derived from content.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl QuestionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopicRef {
    pub topic: String,
    pub subtopic: String,
}

impl TopicRef {
    pub fn new(topic: impl Into<String>, subtopic: impl Into<String>) -> Self {
        Self {
            topic: topic.into(),
            subtopic: subtopic.into(),
        }
    }
}

/// The four option texts. Completeness is guaranteed by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSet {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "C")]
    pub c: String,
    #[serde(rename = "D")]
    pub d: String,
}

impl OptionSet {
    pub fn new(a: impl Into<String>, b: impl Into<String>, c: impl Into<String>, d: impl Into<String>) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            d: d.into(),
        }
    }

    pub fn get(&self, option: AnswerOption) -> &str {
        match option {
            AnswerOption::A => &self.a,
            AnswerOption::B => &self.b,
            AnswerOption::C => &self.c,
            AnswerOption::D => &self.d,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (AnswerOption, &str)> {
        AnswerOption::ALL.into_iter().map(move |o| (o, self.get(o)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: QuestionId,
    pub topic_ref: TopicRef,
    pub stem: String,
    pub options: OptionSet,
    pub generator_model: ModelId,
    pub generator_answer: AnswerOption,
    pub generator_explanation: String,
    pub created_at: DateTime<Utc>,
    pub raw_generation: String,
}

impl QuestionRecord {
    pub fn validate(&self) -> Result<(), DomainError> {
        let empty = |field: &str| DomainError::EmptyField {
            record: self.question_id.to_string(),
            field: field.to_string(),
        };
        if self.question_id.0.trim().is_empty() {
            return Err(empty("question_id"));
        }
        if self.stem.trim().is_empty() {
            return Err(empty("stem"));
        }
        for (opt, text) in self.options.iter() {
            if text.trim().is_empty() {
                return Err(empty(&format!("option {opt}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: QuestionId,
    pub answerer_model: ModelId,
    pub selected: AnswerOption,
    pub justification: String,
    pub created_at: DateTime<Utc>,
    pub raw_response: String,
}

impl AnswerRecord {
    /// Builds an answer to `question`, refusing the question's own generator as answerer.
    pub fn new(
        question: &QuestionRecord,
        answerer_model: ModelId,
        selected: AnswerOption,
        justification: impl Into<String>,
        created_at: DateTime<Utc>,
        raw_response: impl Into<String>,
    ) -> Result<Self, DomainError> {
        if answerer_model == question.generator_model {
            return Err(DomainError::AnswererIsGenerator {
                question_id: question.question_id.clone(),
                model: answerer_model,
            });
        }
        Ok(Self {
            question_id: question.question_id.clone(),
            answerer_model,
            selected,
            justification: justification.into(),
            created_at,
            raw_response: raw_response.into(),
        })
    }
}

/// All records of one generator's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    pub experiment_id: String,
    pub generator_model: ModelId,
    pub answerer_models: Vec<ModelId>,
    pub questions: Vec<QuestionRecord>,
    pub answers: Vec<AnswerRecord>,
    pub config_snapshot: serde_json::Value,
}

/// Number of answering models per question.
pub const ANSWERERS_PER_QUESTION: usize = 3;

impl ExperimentDataset {
    pub fn new(
        experiment_id: impl Into<String>,
        generator_model: ModelId,
        answerer_models: Vec<ModelId>,
        config_snapshot: serde_json::Value,
    ) -> Result<Self, DomainError> {
        let ds = Self {
            experiment_id: experiment_id.into(),
            generator_model,
            answerer_models,
            questions: Vec::new(),
            answers: Vec::new(),
            config_snapshot,
        };
        ds.validate_roster()?;
        Ok(ds)
    }

    pub(crate) fn validate_roster(&self) -> Result<(), DomainError> {
        if self.experiment_id.trim().is_empty() {
            return Err(DomainError::Roster("experiment_id is empty".into()));
        }
        if self.answerer_models.len() != ANSWERERS_PER_QUESTION {
            return Err(DomainError::Roster(format!(
                "expected {ANSWERERS_PER_QUESTION} answerer models, found {}",
                self.answerer_models.len()
            )));
        }
        let mut seen = HashSet::new();
        for m in &self.answerer_models {
            if *m == self.generator_model {
                return Err(DomainError::Roster(format!(
                    "generator model '{m}' is also listed as an answerer"
                )));
            }
            if !seen.insert(m) {
                return Err(DomainError::Roster(format!("duplicate answerer model '{m}'")));
            }
        }
        Ok(())
    }

    /// Checks a question against the dataset it is about to join.
    pub(crate) fn check_question(&self, q: &QuestionRecord, known: &HashSet<QuestionId>) -> Result<(), DomainError> {
        q.validate()?;
        if q.generator_model != self.generator_model {
            return Err(DomainError::GeneratorMismatch {
                question_id: q.question_id.clone(),
                expected: self.generator_model.clone(),
                found: q.generator_model.clone(),
            });
        }
        if known.contains(&q.question_id) {
            return Err(DomainError::DuplicateQuestion(q.question_id.clone()));
        }
        Ok(())
    }

    pub(crate) fn check_answer(
        &self,
        a: &AnswerRecord,
        known: &HashSet<QuestionId>,
        answered: &HashSet<(QuestionId, ModelId)>,
    ) -> Result<(), DomainError> {
        if !known.contains(&a.question_id) {
            return Err(DomainError::UnknownQuestion(a.question_id.clone()));
        }
        if a.answerer_model == self.generator_model {
            return Err(DomainError::AnswererIsGenerator {
                question_id: a.question_id.clone(),
                model: a.answerer_model.clone(),
            });
        }
        if !self.answerer_models.contains(&a.answerer_model) {
            return Err(DomainError::UnknownAnswerer {
                question_id: a.question_id.clone(),
                model: a.answerer_model.clone(),
            });
        }
        if answered.contains(&(a.question_id.clone(), a.answerer_model.clone())) {
            return Err(DomainError::DuplicateAnswer {
                question_id: a.question_id.clone(),
                model: a.answerer_model.clone(),
            });
        }
        Ok(())
    }

    /// Re-checks every invariant except completeness.
    pub fn validate(&self) -> Result<(), DomainError> {
        self.validate_roster()?;
        let mut known = HashSet::new();
        for q in &self.questions {
            self.check_question(q, &known)?;
            known.insert(q.question_id.clone());
        }
        let mut answered = HashSet::new();
        for a in &self.answers {
            self.check_answer(a, &known, &answered)?;
            answered.insert((a.question_id.clone(), a.answerer_model.clone()));
        }
        Ok(())
    }

    fn answer_counts(&self) -> HashMap<&QuestionId, usize> {
        let mut counts: HashMap<&QuestionId, usize> = HashMap::new();
        for a in &self.answers {
            *counts.entry(&a.question_id).or_default() += 1;
        }
        counts
    }

    /// True when some question still lacks one of its three answers.
    pub fn is_partial(&self) -> bool {
        let counts = self.answer_counts();
        self.questions
            .iter()
            .any(|q| counts.get(&q.question_id).copied().unwrap_or(0) < ANSWERERS_PER_QUESTION)
    }

    /// Questions that have all three answers, in dataset order.
    pub fn complete_questions(&self) -> Vec<&QuestionRecord> {
        let counts = self.answer_counts();
        self.questions
            .iter()
            .filter(|q| counts.get(&q.question_id).copied().unwrap_or(0) == ANSWERERS_PER_QUESTION)
            .collect()
    }

    /// Answers to `question_id`, ordered by the answerer roster.
    pub fn answers_for(&self, question_id: &QuestionId) -> Vec<&AnswerRecord> {
        let mut out: Vec<&AnswerRecord> = self.answers.iter().filter(|a| &a.question_id == question_id).collect();
        out.sort_by_key(|a| {
            self.answerer_models
                .iter()
                .position(|m| *m == a.answerer_model)
                .unwrap_or(usize::MAX)
        });
        out
    }

    /// Copy keeping only complete questions and their answers.
    pub fn without_incomplete(&self) -> (Self, usize) {
        let keep: HashSet<&QuestionId> = self.complete_questions().into_iter().map(|q| &q.question_id).collect();
        let dropped = self.questions.len() - keep.len();
        let ds = Self {
            experiment_id: self.experiment_id.clone(),
            generator_model: self.generator_model.clone(),
            answerer_models: self.answerer_models.clone(),
            questions: self
                .questions
                .iter()
                .filter(|q| keep.contains(&q.question_id))
                .cloned()
                .collect(),
            answers: self
                .answers
                .iter()
                .filter(|a| keep.contains(&a.question_id))
                .cloned()
                .collect(),
            config_snapshot: self.config_snapshot.clone(),
        };
        (ds, dropped)
    }

    /// Answer counts per option, pooled over every question.
    pub fn option_histogram(&self) -> BTreeMap<AnswerOption, u64> {
        let mut h = BTreeMap::new();
        for a in &self.answers {
            *h.entry(a.selected).or_insert(0) += 1;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid answer option {0:?}: expected one of A, B, C, D")]
    InvalidOption(String),
    #[error("record {record}: field `{field}` is empty")]
    EmptyField { record: String, field: String },
    #[error("question {question_id}: model '{model}' generated the question and cannot answer it")]
    AnswererIsGenerator { question_id: QuestionId, model: ModelId },
    #[error("answer references unknown question {0}")]
    UnknownQuestion(QuestionId),
    #[error("question {question_id}: model '{model}' is not one of the dataset's answerers")]
    UnknownAnswerer { question_id: QuestionId, model: ModelId },
    #[error("question {question_id}: duplicate answer from model '{model}'")]
    DuplicateAnswer { question_id: QuestionId, model: ModelId },
    #[error("duplicate question id {0}")]
    DuplicateQuestion(QuestionId),
    #[error("question {question_id}: generator '{found}' differs from dataset generator '{expected}'")]
    GeneratorMismatch {
        question_id: QuestionId,
        expected: ModelId,
        found: ModelId,
    },
    #[error("invalid model roster: {0}")]
    Roster(String),
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use chrono::TimeZone;

    pub fn ts(sec: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + sec, 0).unwrap()
    }

    pub fn question(id: &str, generator: &str, answer: AnswerOption) -> QuestionRecord {
        QuestionRecord {
            question_id: QuestionId::from(id),
            topic_ref: TopicRef::new("Bayesian inference", "Conjugate priors"),
            stem: format!("Stem for {id}?"),
            options: OptionSet::new("alpha", "beta", "gamma", "delta"),
            generator_model: ModelId::from(generator),
            generator_answer: answer,
            generator_explanation: format!("Because {id}."),
            created_at: ts(0),
            raw_generation: "raw".into(),
        }
    }

    pub fn answer(q: &QuestionRecord, model: &str, selected: AnswerOption) -> AnswerRecord {
        AnswerRecord::new(
            q,
            ModelId::from(model),
            selected,
            "why",
            ts(1),
            format!("Answer: {selected}"),
        )
        .unwrap()
    }

    pub fn dataset(n: usize) -> ExperimentDataset {
        let mut ds = ExperimentDataset::new(
            "exp-1",
            ModelId::from("gen"),
            vec!["m1".into(), "m2".into(), "m3".into()],
            serde_json::json!({"seed": 1}),
        )
        .unwrap();
        for i in 0..n {
            let q = question(&format!("q{i}"), "gen", AnswerOption::B);
            for m in ["m1", "m2", "m3"] {
                ds.answers.push(answer(&q, m, AnswerOption::B));
            }
            ds.questions.push(q);
        }
        ds
    }
}
