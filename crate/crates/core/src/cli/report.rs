//! The analysis report: structured, serializable, rendered separately.

use std::path::Path;

use chrono::{DateTime, Utc};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{evaluate_dataset, AgreementCategory, ConsensusError, ConsensusResult, ExperimentSummary};
use crate::domain::{read_dataset, AnswerOption, DatasetError, ExperimentDataset, ModelId, ANSWERERS_PER_QUESTION};
use crate::orchestrator::ARTIFACT_VERSION;
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::stats::{
    bootstrap_ci, chi_square_test, compare_cis, fleiss_kappa, BootstrapCi, ChiSquareResult, CiRelation, KappaResult,
    StatsError, RNG_ALGORITHM,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    FullAgreement,
    Reliability,
}

impl Indicator {
    pub const ALL: [Indicator; 2] = [Self::FullAgreement, Self::Reliability];

    pub fn label(self) -> &'static str {
        match self {
            Self::FullAgreement => "full agreement",
            Self::Reliability => "reliability",
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Self::FullAgreement => "bootstrap/full_agreement",
            Self::Reliability => "bootstrap/reliability",
        }
    }

    fn hit(self, r: &ConsensusResult) -> bool {
        match self {
            Self::FullAgreement => r.category == AgreementCategory::FullAgreement,
            Self::Reliability => r.reliable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorCi {
    pub indicator: Indicator,
    #[serde(flatten)]
    pub ci: BootstrapCi<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub experiment_id: String,
    pub generator_model: ModelId,
    pub answerer_models: Vec<ModelId>,
    /// Questions left out because they lacked answers.
    pub dropped_incomplete: usize,
    pub summary: ExperimentSummary,
    pub chi_square: ChiSquareResult<f64>,
    pub kappa: KappaResult<f64>,
    /// Kappa as an exact fraction, e.g. `1/4`.
    pub kappa_exact: String,
    pub confidence_intervals: Vec<IndicatorCi>,
}

impl GeneratorEntry {
    pub fn ci(&self, indicator: Indicator) -> &BootstrapCi<f64> {
        &self
            .confidence_intervals
            .iter()
            .find(|c| c.indicator == indicator)
            .expect("every entry carries both indicators")
            .ci
    }
}

/// `relations[i][j]` compares entries `i` and `j`; the diagonal is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub indicator: Indicator,
    pub models: Vec<ModelId>,
    pub relations: Vec<Vec<Option<CiRelation>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub seed: u64,
    pub bootstrap_b: usize,
    pub confidence_level: f64,
    pub rng_algorithm: String,
    pub allow_partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_schema_version: u32,
    pub artifact_version: String,
    /// Latest record timestamp across the inputs, so the report is a pure
    /// function of the datasets and settings.
    pub emitted_at: DateTime<Utc>,
    pub settings: AnalysisSettings,
    pub per_generator: Vec<GeneratorEntry>,
    pub pairwise_ci_comparisons: Vec<PairwiseComparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub seed: u64,
    pub bootstrap_b: usize,
    pub confidence_level: f64,
    pub allow_partial: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            bootstrap_b: crate::stats::DEFAULT_RESAMPLES,
            confidence_level: 0.95,
            allow_partial: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("no datasets to analyze")]
    Empty,
    #[error("{path}: {source}")]
    Dataset {
        path: String,
        #[source]
        source: DatasetError,
    },
    #[error(
        "dataset '{experiment_id}' has {incomplete} question(s) without all answers (use --allow-partial to drop them)"
    )]
    Partial { experiment_id: String, incomplete: usize },
    #[error("dataset '{0}' has no complete questions")]
    NoCompleteQuestions(String),
    #[error("dataset '{experiment_id}': {source}")]
    Consensus {
        experiment_id: String,
        #[source]
        source: ConsensusError,
    },
    #[error("dataset '{experiment_id}': {source}")]
    Stats {
        experiment_id: String,
        #[source]
        source: StatsError,
    },
}

pub fn load_datasets<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<ExperimentDataset>, AnalyzeError> {
    paths
        .iter()
        .map(|p| {
            read_dataset(p).map_err(|source| AnalyzeError::Dataset {
                path: p.as_ref().display().to_string(),
                source,
            })
        })
        .collect()
}

fn indicator_series(results: &[ConsensusResult], indicator: Indicator) -> Vec<f64> {
    results
        .iter()
        .map(|r| if indicator.hit(r) { 1.0 } else { 0.0 })
        .collect()
}

fn analyze_one(ds: &ExperimentDataset, opts: &AnalysisOptions) -> Result<GeneratorEntry, AnalyzeError> {
    let id = ds.experiment_id.clone();
    let (ds, dropped) = ds.without_incomplete();
    if dropped > 0 && !opts.allow_partial {
        return Err(AnalyzeError::Partial {
            experiment_id: id,
            incomplete: dropped,
        });
    }
    if ds.questions.is_empty() {
        return Err(AnalyzeError::NoCompleteQuestions(id));
    }
    let consensus_err = |source| AnalyzeError::Consensus {
        experiment_id: id.clone(),
        source,
    };
    let stats_err = |source| AnalyzeError::Stats {
        experiment_id: id.clone(),
        source,
    };
    let results = evaluate_dataset(&ds).map_err(consensus_err)?;
    let summary = ExperimentSummary::from_results(ds.generator_model.clone(), &results).map_err(consensus_err)?;

    let hist = ds.option_histogram();
    let observed = AnswerOption::ALL.map(|o| hist.get(&o).copied().unwrap_or(0));
    let chi_square =
        chi_square_test::<f64>(observed, results.len() as u64, ANSWERERS_PER_QUESTION as u64).map_err(stats_err)?;

    let rows: Vec<[u32; 4]> = results.iter().map(|r| r.tally.0).collect();
    let exact = fleiss_kappa::<Ratio<i128>, _>(&rows).map_err(stats_err)?;
    let kappa = KappaResult {
        kappa: Scalar::to_f64(exact.kappa),
        p_bar: Scalar::to_f64(exact.p_bar),
        pe_bar: Scalar::to_f64(exact.pe_bar),
        interpretation: exact.interpretation,
        degenerate: exact.degenerate,
    };

    let confidence_intervals = Indicator::ALL
        .into_iter()
        .map(|indicator| {
            let seed = derive_seed(opts.seed, indicator.tag(), &id);
            bootstrap_ci(
                &indicator_series(&results, indicator),
                opts.confidence_level,
                opts.bootstrap_b,
                seed,
            )
            .map(|ci| IndicatorCi { indicator, ci })
            .map_err(stats_err)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(GeneratorEntry {
        experiment_id: id.clone(),
        generator_model: ds.generator_model.clone(),
        answerer_models: ds.answerer_models.clone(),
        dropped_incomplete: dropped,
        summary,
        chi_square,
        kappa,
        kappa_exact: exact.kappa.to_string(),
        confidence_intervals,
    })
}

/// Consensus, chi-square, kappa and bootstrap CIs for each dataset, plus
/// pairwise CI comparisons across datasets.
pub fn analyze(datasets: &[ExperimentDataset], opts: &AnalysisOptions) -> Result<Report, AnalyzeError> {
    if datasets.is_empty() {
        return Err(AnalyzeError::Empty);
    }
    let per_generator = datasets
        .iter()
        .map(|d| analyze_one(d, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let emitted_at = datasets
        .iter()
        .flat_map(|d| {
            d.questions
                .iter()
                .map(|q| q.created_at)
                .chain(d.answers.iter().map(|a| a.created_at))
        })
        .max()
        .unwrap_or_default();

    let pairwise_ci_comparisons = Indicator::ALL
        .into_iter()
        .map(|indicator| {
            let relations = per_generator
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    per_generator
                        .iter()
                        .enumerate()
                        .map(|(j, b)| {
                            (i != j)
                                .then(|| compare_cis(a.ci(indicator), b.ci(indicator)).expect("same level throughout"))
                        })
                        .collect()
                })
                .collect();
            PairwiseComparison {
                indicator,
                models: per_generator.iter().map(|e| e.generator_model.clone()).collect(),
                relations,
            }
        })
        .collect();

    Ok(Report {
        report_schema_version: REPORT_SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.to_string(),
        emitted_at,
        settings: AnalysisSettings {
            seed: opts.seed,
            bootstrap_b: opts.bootstrap_b,
            confidence_level: opts.confidence_level,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            allow_partial: opts.allow_partial,
        },
        per_generator,
        pairwise_ci_comparisons,
    })
}
