//! End-to-end experiment execution.
//!
//! One experiment fixes a generator; every question it produces is answered
//! independently by the remaining three models. A rotation runs one
//! experiment per model. Records are persisted as they are produced, so an
//! aborted run leaves a readable partial dataset.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::future::join_all;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use tokio::sync::Semaphore;
use tracing::{info, warn};

use crate::agents::{
    answer_question, build_agent, generate_question, Agent, AgentError, PromptTemplates, TemplateError, Transport,
};
use crate::domain::{
    load_topic_map, AnswerRecord, DatasetError, DatasetWriter, DomainError, ExperimentDataset, ModelId, QuestionId,
    QuestionRecord, TopicMap, TopicMapError, TopicRef,
};
use crate::seed::derive_seed;

pub(crate) use config::Clock;
pub use config::{ClockMode, ConfigError, Rotation, RunConfig, LOGICAL_EPOCH, MODELS_PER_RUN};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ARTIFACT_VERSION: &str = concat!("mcq-consensus ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("topic map: {0}")]
    TopicMap(#[from] TopicMapError),
    #[error("prompt templates: {0}")]
    Prompts(#[from] TemplateError),
    #[error("agent setup failed: {0}")]
    Preflight(#[source] AgentError),
    #[error("generator '{0}' is not a configured model")]
    UnknownGenerator(ModelId),
    #[error("experiment with generator '{generator}' aborted: {source}")]
    Agent {
        generator: ModelId,
        #[source]
        source: AgentError,
    },
    #[error("experiment with generator '{generator}' gave up after {skips} unparseable generations")]
    SkipBudget { generator: ModelId, skips: usize },
    #[error("experiment with generator '{generator}': {source}")]
    Dataset {
        generator: ModelId,
        #[source]
        source: DatasetError,
    },
    #[error("rotation run {run} (generator '{generator}') failed; {completed} earlier run(s) kept: {source}")]
    Rotation {
        run: usize,
        generator: ModelId,
        completed: usize,
        #[source]
        source: Box<RunError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// The underlying per-experiment error for rotation failures.
    pub fn root(&self) -> &RunError {
        match self {
            Self::Rotation { source, .. } => source.root(),
            other => other,
        }
    }
}

/// One finished experiment.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dataset: ExperimentDataset,
    pub path: PathBuf,
    pub experiment_seed: u64,
    /// Generations discarded because they could not be parsed.
    pub skip_count: usize,
    /// Agent calls issued, per model.
    pub requests: BTreeMap<ModelId, u64>,
}

#[derive(Debug, Serialize)]
struct ManifestRun<'a> {
    experiment_id: &'a str,
    generator: &'a ModelId,
    file: String,
    experiment_seed: u64,
    n_questions: usize,
    n_answers: usize,
    skip_count: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    artifact_version: &'static str,
    runs: Vec<ManifestRun<'a>>,
    requests: BTreeMap<&'a ModelId, u64>,
    failure: Option<String>,
    config: &'a RunConfig,
}

/// Characters outside `[A-Za-z0-9._-]` become `_`.
pub fn sanitize_file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub struct Orchestrator {
    config: RunConfig,
    agents: Vec<Arc<dyn Agent>>,
    pairs: Vec<TopicRef>,
}

impl Orchestrator {
    /// Validates the config and builds every agent. Missing API keys and
    /// bad templates fail here, before any request is sent.
    pub fn new(config: RunConfig, transport: Arc<dyn Transport>) -> Result<Self, RunError> {
        config.validate()?;
        let topics = match &config.topic_map_path {
            Some(p) => load_topic_map(p)?,
            None => TopicMap::default_map(),
        };
        let prompts = Arc::new(match &config.prompts_path {
            Some(p) => PromptTemplates::load(p)?,
            None => PromptTemplates::default(),
        });
        let agents = config
            .models
            .iter()
            .map(|m| build_agent(m, prompts.clone(), transport.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(RunError::Preflight)?;
        Ok(Self {
            pairs: topics.pairs(),
            config,
            agents,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn experiment_seed(&self, generator: &ModelId) -> u64 {
        derive_seed(self.config.seed, "experiment", generator.as_str())
    }

    /// Runs one experiment with `generator` producing every question.
    pub async fn run_experiment(&self, generator: &ModelId) -> Result<RunOutcome, RunError> {
        let gen_agent = self
            .agents
            .iter()
            .find(|a| a.model_id() == generator)
            .ok_or_else(|| RunError::UnknownGenerator(generator.clone()))?
            .clone();
        let answerers: Vec<_> = self
            .agents
            .iter()
            .filter(|a| a.model_id() != generator)
            .cloned()
            .collect();
        let seed = self.experiment_seed(generator);
        let experiment_id = format!("{}-{seed:016x}", sanitize_file_stem(generator.as_str()));
        let snapshot = serde_json::json!({
            "run": &self.config,
            "generator": generator,
            "experiment_seed": seed,
        });
        let dataset_err = |source| RunError::Dataset {
            generator: generator.clone(),
            source,
        };
        let mut dataset = ExperimentDataset::new(
            experiment_id.clone(),
            generator.clone(),
            answerers.iter().map(|a| a.model_id().clone()).collect(),
            snapshot,
        )
        .map_err(|e| dataset_err(DatasetError::Invalid(e)))?;

        std::fs::create_dir_all(&self.config.output_dir).map_err(|source| RunError::Io {
            path: self.config.output_dir.clone(),
            source,
        })?;
        let path = self.config.output_dir.join(format!("{experiment_id}.jsonl"));
        let mut writer = DatasetWriter::create(&path, &dataset).map_err(dataset_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut clock = Clock::new(self.config.clock);
        let semaphore = Semaphore::new(self.config.max_parallel_requests);
        let mut requests: BTreeMap<ModelId, u64> = self.agents.iter().map(|a| (a.model_id().clone(), 0)).collect();
        let mut skip_count = 0;
        info!(experiment = %experiment_id, generator = %generator, n = self.config.n_questions, "starting experiment");

        while dataset.questions.len() < self.config.n_questions {
            let topic = self.pairs[rng.random_range(0..self.pairs.len())].clone();
            *requests.entry(generator.clone()).or_default() += 1;
            let generation = match generate_question(gen_agent.as_ref(), &topic).await {
                Ok(g) => g,
                Err(e) if e.is_generation_parse() => {
                    skip_count += 1;
                    warn!(generator = %generator, skips = skip_count, "discarding unparseable generation: {e}");
                    if skip_count > self.config.max_skips {
                        return Err(RunError::SkipBudget {
                            generator: generator.clone(),
                            skips: skip_count,
                        });
                    }
                    continue;
                }
                Err(source) => {
                    return Err(RunError::Agent {
                        generator: generator.clone(),
                        source,
                    })
                }
            };
            let id = uuid::Builder::from_random_bytes(rng.random()).into_uuid();
            let q = generation.question;
            let question = QuestionRecord {
                question_id: QuestionId(id.to_string()),
                topic_ref: topic,
                stem: q.stem,
                options: q.options,
                generator_model: generator.clone(),
                generator_answer: q.correct,
                generator_explanation: q.explanation,
                created_at: clock.now(),
                raw_generation: generation.raw,
            };
            writer.append_question(&question).map_err(dataset_err)?;

            let pending = answerers.iter().map(|a| {
                let (semaphore, question) = (&semaphore, &question);
                async move {
                    let _permit = semaphore.acquire().await.expect("semaphore never closed");
                    answer_question(a.as_ref(), question).await
                }
            });
            let results = join_all(pending).await;

            // Persist in roster order regardless of completion order; keep
            // every answer that did arrive before surfacing a failure.
            let mut failure = None;
            let mut answers = Vec::with_capacity(answerers.len());
            for (agent, result) in answerers.iter().zip(results) {
                *requests.entry(agent.model_id().clone()).or_default() += 1;
                match result {
                    Ok(out) => {
                        let record = AnswerRecord::new(
                            &question,
                            agent.model_id().clone(),
                            out.selected,
                            out.justification,
                            clock.now(),
                            out.raw,
                        )
                        .map_err(|e: DomainError| dataset_err(DatasetError::Invalid(e)))?;
                        writer.append_answer(&record).map_err(dataset_err)?;
                        answers.push(record);
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            }
            dataset.questions.push(question);
            dataset.answers.extend(answers);
            if let Some(source) = failure {
                return Err(RunError::Agent {
                    generator: generator.clone(),
                    source,
                });
            }
        }
        info!(experiment = %experiment_id, skips = skip_count, "experiment complete");
        Ok(RunOutcome {
            dataset,
            path,
            experiment_seed: seed,
            skip_count,
            requests,
        })
    }

    /// One experiment per configured model as generator, in config order.
    /// Completed runs stay on disk if a later one fails.
    pub async fn run_rotation(&self) -> Result<Vec<RunOutcome>, (Vec<RunOutcome>, RunError)> {
        let mut done = Vec::new();
        for (i, generator) in self.config.model_ids().iter().enumerate() {
            match self.run_experiment(generator).await {
                Ok(outcome) => done.push(outcome),
                Err(e) => {
                    let completed = done.len();
                    let err = RunError::Rotation {
                        run: i + 1,
                        generator: generator.clone(),
                        completed,
                        source: Box::new(e),
                    };
                    return Err((done, err));
                }
            }
        }
        Ok(done)
    }

    /// Runs according to the configured rotation and writes the manifest,
    /// including on failure.
    pub async fn execute(&self) -> Result<Vec<RunOutcome>, RunError> {
        let (outcomes, failure) = match &self.config.rotation {
            Rotation::FullRotation => match self.run_rotation().await {
                Ok(o) => (o, None),
                Err((o, e)) => (o, Some(e)),
            },
            Rotation::SingleGenerator { model } => match self.run_experiment(model).await {
                Ok(o) => (vec![o], None),
                Err(e) => (Vec::new(), Some(e)),
            },
        };
        self.write_manifest(&outcomes, failure.as_ref())?;
        match failure {
            Some(e) => Err(e),
            None => Ok(outcomes),
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.config.output_dir.join(MANIFEST_FILE)
    }

    fn write_manifest(&self, outcomes: &[RunOutcome], failure: Option<&RunError>) -> Result<(), RunError> {
        let mut requests: BTreeMap<&ModelId, u64> = BTreeMap::new();
        for o in outcomes {
            for (m, n) in &o.requests {
                *requests.entry(m).or_default() += n;
            }
        }
        let manifest = Manifest {
            artifact_version: ARTIFACT_VERSION,
            runs: outcomes
                .iter()
                .map(|o| ManifestRun {
                    experiment_id: &o.dataset.experiment_id,
                    generator: &o.dataset.generator_model,
                    file: file_name(&o.path),
                    experiment_seed: o.experiment_seed,
                    n_questions: o.dataset.questions.len(),
                    n_answers: o.dataset.answers.len(),
                    skip_count: o.skip_count,
                })
                .collect(),
            requests,
            failure: failure.map(|e| e.to_string()),
            config: &self.config,
        };
        let path = self.manifest_path();
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::create_dir_all(&self.config.output_dir)
            .and_then(|_| std::fs::write(&path, text))
            .map_err(|source| RunError::Io { path, source })
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}
