//! Run configuration, loaded from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentConfig;
use crate::domain::{ModelId, ANSWERERS_PER_QUESTION};
use crate::stats::{DEFAULT_RESAMPLES, MIN_RESAMPLES};

/// One generator plus the answerers.
pub const MODELS_PER_RUN: usize = ANSWERERS_PER_QUESTION + 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Rotation {
    SingleGenerator {
        model: ModelId,
    },
    #[default]
    FullRotation,
}

/// Source of record timestamps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    System,
    /// A fixed epoch plus one second per persisted record. Makes runs
    /// byte-reproducible.
    Logical,
}

pub const LOGICAL_EPOCH: &str = "2024-01-01T00:00:00Z";

pub(crate) struct Clock {
    mode: ClockMode,
    ticks: i64,
}

impl Clock {
    pub(crate) fn new(mode: ClockMode) -> Self {
        Self { mode, ticks: 0 }
    }

    pub(crate) fn now(&mut self) -> DateTime<Utc> {
        match self.mode {
            ClockMode::System => Utc::now(),
            ClockMode::Logical => {
                let epoch: DateTime<Utc> = LOGICAL_EPOCH.parse().expect("valid epoch");
                self.ticks += 1;
                epoch + chrono::Duration::seconds(self.ticks)
            }
        }
    }
}

fn default_n_questions() -> usize {
    100
}
fn default_bootstrap_b() -> usize {
    DEFAULT_RESAMPLES
}
fn default_level() -> f64 {
    0.95
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_parallel() -> usize {
    3
}
fn default_max_skips() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub models: Vec<AgentConfig>,
    #[serde(default = "default_n_questions")]
    pub n_questions: usize,
    /// Defaults to the built-in ten-topic map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_map_path: Option<PathBuf>,
    /// Optional TOML file overriding the prompt templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts_path: Option<PathBuf>,
    #[serde(default)]
    pub rotation: Rotation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    #[serde(default = "default_level")]
    pub confidence_level: f64,
    /// Not part of the dataset snapshot: moving the output leaves datasets unchanged.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallel")]
    pub max_parallel_requests: usize,
    /// Regeneration budget per experiment for unparseable generator output.
    #[serde(default = "default_max_skips")]
    pub max_skips: usize,
    #[serde(default)]
    pub clock: ClockMode,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

impl RunConfig {
    pub fn new(models: Vec<AgentConfig>) -> Self {
        Self {
            models,
            n_questions: default_n_questions(),
            topic_map_path: None,
            prompts_path: None,
            rotation: Rotation::default(),
            seed: 0,
            bootstrap_b: default_bootstrap_b(),
            confidence_level: default_level(),
            output_dir: default_output_dir(),
            max_parallel_requests: default_parallel(),
            max_skips: default_max_skips(),
            clock: ClockMode::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.topic_map_path, &mut config.prompts_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    /// Every violated rule, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.models.len() != MODELS_PER_RUN {
            v.push(format!(
                "exactly {MODELS_PER_RUN} models are required (one generator, {ANSWERERS_PER_QUESTION} answerers), got {}",
                self.models.len()
            ));
        }
        let mut seen = BTreeSet::new();
        for m in &self.models {
            if !seen.insert(&m.model_id) {
                v.push(format!("duplicate model '{}'", m.model_id));
            }
            v.extend(m.violations());
        }
        if self.n_questions == 0 {
            v.push("n_questions must be at least 1".into());
        }
        if self.bootstrap_b < MIN_RESAMPLES {
            v.push(format!(
                "bootstrap_b must be at least {MIN_RESAMPLES}, got {}",
                self.bootstrap_b
            ));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            v.push(format!(
                "confidence_level must be in (0, 1), got {}",
                self.confidence_level
            ));
        }
        if self.max_parallel_requests == 0 {
            v.push("max_parallel_requests must be at least 1".into());
        }
        if let Rotation::SingleGenerator { model } = &self.rotation {
            if !self.models.iter().any(|m| &m.model_id == model) {
                v.push(format!(
                    "rotation generator '{model}' is not among the configured models"
                ));
            }
        }
        v
    }

    pub fn model_ids(&self) -> Vec<ModelId> {
        self.models.iter().map(|m| m.model_id.clone()).collect()
    }
}
