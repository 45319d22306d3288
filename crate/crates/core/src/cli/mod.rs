//! Command-line surface: `run`, `simulate`, `analyze`, `report`.
//!
//! Commands return their stdout text; failures carry a stable error class
//! that `main` prints as `error[<class>]: ...` and maps to an exit code.

mod render;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::agents::{AgentConfig, AgentError, ReqwestTransport, StochasticAgentParams, Transport};
use crate::domain::{ExperimentDataset, ModelId};
use crate::orchestrator::{ClockMode, Orchestrator, Rotation, RunConfig, RunError, RunOutcome};
use crate::seed::derive_seed;

pub use render::{build_tables, format_p_value, render_markdown, write_csv, RenderError, ReportFormat, Table};
pub use report::{
    analyze, load_datasets, AnalysisOptions, AnalysisSettings, AnalyzeError, GeneratorEntry, Indicator, IndicatorCi,
    PairwiseComparison, Report, REPORT_SCHEMA_VERSION,
};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MARKDOWN: &str = "report.md";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Config,
    Preflight,
    Transport,
    Agent,
    Generation,
    Data,
    Io,
    Render,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Usage => "usage",
            Self::Config => "config",
            Self::Preflight => "preflight",
            Self::Transport => "transport",
            Self::Agent => "agent",
            Self::Generation => "generation",
            Self::Data => "data",
            Self::Io => "io",
            Self::Render => "render",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::Usage => 2,
            Self::Config => 3,
            Self::Preflight => 4,
            Self::Transport => 5,
            Self::Agent => 6,
            Self::Generation => 7,
            Self::Data => 8,
            Self::Io => 9,
            Self::Render => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl fmt::Display) -> Self {
        Self {
            class,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        let class = match e.root() {
            RunError::Config(_) | RunError::TopicMap(_) | RunError::Prompts(_) | RunError::UnknownGenerator(_) => {
                ErrorClass::Config
            }
            RunError::Preflight(_) => ErrorClass::Preflight,
            RunError::Agent {
                source: AgentError::Transport { .. },
                ..
            } => ErrorClass::Transport,
            RunError::Agent { .. } => ErrorClass::Agent,
            RunError::SkipBudget { .. } => ErrorClass::Generation,
            RunError::Dataset { .. } => ErrorClass::Data,
            RunError::Io { .. } | RunError::Rotation { .. } => ErrorClass::Io,
        };
        Self::new(class, e)
    }
}

impl From<AnalyzeError> for CliError {
    fn from(e: AnalyzeError) -> Self {
        Self::new(ErrorClass::Data, e)
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        let class = match e {
            RenderError::UnknownFormat(_) => ErrorClass::Usage,
            RenderError::EmptyReport => ErrorClass::Data,
            RenderError::Io { .. } | RenderError::Csv { .. } => ErrorClass::Io,
        };
        Self::new(class, e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mcq-consensus",
    version,
    about = "Multi-model MCQ generation, isolated answering and consensus analysis"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where datasets, manifest and reports are written.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Drop questions lacking answers instead of refusing to analyze.
    #[arg(long, global = true)]
    pub allow_partial: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run experiments from a config file (full rotation unless --generator).
    Run {
        #[arg(long)]
        generator: Option<String>,
    },
    /// Offline run with four stochastic agents.
    Simulate {
        #[arg(long, default_value_t = 0.9)]
        accuracy: f64,
        #[arg(long, default_value_t = 0.0)]
        correlation: f64,
        #[arg(long, default_value_t = 100)]
        n_questions: usize,
        /// Run a single experiment with this generator (sim-1 .. sim-4).
        #[arg(long)]
        generator: Option<String>,
        #[arg(long)]
        bootstrap_b: Option<usize>,
    },
    /// Analyze dataset files into report.json and report.md.
    Analyze {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        bootstrap_b: Option<usize>,
        #[arg(long)]
        confidence_level: Option<f64>,
    },
    /// Render a report.json as markdown (stdout) or CSV files.
    Report {
        report: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

/// Files produced by `run` or `simulate`.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub outcomes: Vec<RunOutcome>,
    pub manifest: PathBuf,
    pub report_json: PathBuf,
    pub report: Report,
}

impl RunArtifacts {
    pub fn dataset_paths(&self) -> Vec<&Path> {
        self.outcomes.iter().map(|o| o.path.as_path()).collect()
    }

    fn describe(&self) -> String {
        let mut out: String = self
            .dataset_paths()
            .iter()
            .map(|p| format!("{}\n", p.display()))
            .collect();
        out += &format!("{}\n{}\n", self.manifest.display(), self.report_json.display());
        out
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::new(ErrorClass::Io, format!("{}: {e}", path.display()))
}

/// Writes `report.json` and `report.md` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let json_path = dir.join(REPORT_JSON);
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(&json_path, text).map_err(|e| io_error(&json_path, e))?;
    let md_path = dir.join(REPORT_MARKDOWN);
    std::fs::write(&md_path, render_markdown(report)?).map_err(|e| io_error(&md_path, e))?;
    Ok(json_path)
}

/// Runs a validated config end to end: experiments, manifest, report.
pub async fn execute_config(config: RunConfig, transport: Arc<dyn Transport>) -> Result<RunArtifacts, CliError> {
    let output_dir = config.output_dir.clone();
    let opts = AnalysisOptions {
        seed: config.seed,
        bootstrap_b: config.bootstrap_b,
        confidence_level: config.confidence_level,
        allow_partial: false,
    };
    let orchestrator = Orchestrator::new(config, transport)?;
    let outcomes = orchestrator.execute().await?;
    let datasets: Vec<ExperimentDataset> = outcomes.iter().map(|o| o.dataset.clone()).collect();
    let report = analyze(&datasets, &opts)?;
    let report_json = write_report(&report, &output_dir)?;
    Ok(RunArtifacts {
        outcomes,
        manifest: orchestrator.manifest_path(),
        report_json,
        report,
    })
}

/// Global flags shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub allow_partial: bool,
}

fn apply_overrides(config: &mut RunConfig, global: &GlobalOptions) {
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(dir) = &global.output_dir {
        config.output_dir = dir.clone();
    }
}

pub async fn cmd_run(
    config_path: &Path,
    generator: Option<&str>,
    global: &GlobalOptions,
) -> Result<RunArtifacts, CliError> {
    let mut config = RunConfig::load(config_path).map_err(|e| CliError::new(ErrorClass::Config, e))?;
    apply_overrides(&mut config, global);
    if let Some(g) = generator {
        config.rotation = Rotation::SingleGenerator { model: ModelId::new(g) };
    }
    config.validate().map_err(|e| CliError::new(ErrorClass::Config, e))?;
    execute_config(config, Arc::new(ReqwestTransport::new())).await
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateParams {
    pub accuracy: f64,
    pub correlation: f64,
    pub n_questions: usize,
    pub seed: u64,
    pub generator: Option<String>,
    pub bootstrap_b: Option<usize>,
    pub output_dir: PathBuf,
}

pub const SIMULATED_MODELS: [&str; 4] = ["sim-1", "sim-2", "sim-3", "sim-4"];

/// The config `simulate` runs: four stochastic agents with per-agent seeds
/// derived from the master seed, and a logical clock.
pub fn simulation_config(p: &SimulateParams) -> RunConfig {
    let models = SIMULATED_MODELS
        .iter()
        .map(|name| {
            AgentConfig::stochastic(
                *name,
                StochasticAgentParams {
                    accuracy: p.accuracy,
                    correlation: p.correlation,
                    rng_seed: derive_seed(p.seed, "agent", name),
                },
            )
        })
        .collect();
    let mut config = RunConfig::new(models);
    config.n_questions = p.n_questions;
    config.seed = p.seed;
    config.output_dir = p.output_dir.clone();
    config.clock = ClockMode::Logical;
    if let Some(b) = p.bootstrap_b {
        config.bootstrap_b = b;
    }
    if let Some(g) = &p.generator {
        config.rotation = Rotation::SingleGenerator {
            model: ModelId::new(g.as_str()),
        };
    }
    config
}

pub async fn cmd_simulate(params: &SimulateParams) -> Result<RunArtifacts, CliError> {
    let config = simulation_config(params);
    config.validate().map_err(|e| CliError::new(ErrorClass::Config, e))?;
    execute_config(config, Arc::new(ReqwestTransport::new())).await
}

/// Analysis settings recorded in a dataset's config snapshot, if any.
fn snapshot_settings(ds: &ExperimentDataset) -> (Option<u64>, Option<usize>, Option<f64>) {
    let run = &ds.config_snapshot["run"];
    (
        run["seed"].as_u64(),
        run["bootstrap_b"].as_u64().map(|b| b as usize),
        run["confidence_level"].as_f64(),
    )
}

/// Analyzes dataset files. Unset options fall back to the settings the
/// datasets were produced with, so re-analysis reproduces the run's report.
pub fn cmd_analyze(
    paths: &[PathBuf],
    global: &GlobalOptions,
    bootstrap_b: Option<usize>,
    confidence_level: Option<f64>,
) -> Result<(Report, PathBuf), CliError> {
    let datasets = load_datasets(paths)?;
    let (snap_seed, snap_b, snap_level) = datasets.first().map(snapshot_settings).unwrap_or_default();
    let defaults = AnalysisOptions::default();
    let opts = AnalysisOptions {
        seed: global.seed.or(snap_seed).unwrap_or(defaults.seed),
        bootstrap_b: bootstrap_b.or(snap_b).unwrap_or(defaults.bootstrap_b),
        confidence_level: confidence_level.or(snap_level).unwrap_or(defaults.confidence_level),
        allow_partial: global.allow_partial,
    };
    let report = analyze(&datasets, &opts)?;
    let dir = global.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = write_report(&report, &dir)?;
    Ok((report, path))
}

pub fn load_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::new(ErrorClass::Data, format!("{}: {e}", path.display())))?;
    match value["report_schema_version"].as_u64() {
        Some(v) if v == REPORT_SCHEMA_VERSION as u64 => {}
        found => {
            return Err(CliError::new(
                ErrorClass::Data,
                format!(
                    "{}: unsupported report schema {found:?} (expected {REPORT_SCHEMA_VERSION})",
                    path.display()
                ),
            ))
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::new(ErrorClass::Data, format!("{}: {e}", path.display())))
}

/// Markdown goes to stdout; CSV tables are written to `output_dir`
/// (default: next to the report) and their paths returned.
pub fn cmd_report(report_path: &Path, format: &str, output_dir: Option<&Path>) -> Result<String, CliError> {
    let format: ReportFormat = format.parse()?;
    let report = load_report(report_path)?;
    match format {
        ReportFormat::Markdown => Ok(render_markdown(&report)?),
        ReportFormat::Csv => {
            let dir = output_dir
                .map(Path::to_path_buf)
                .unwrap_or_else(|| report_path.parent().unwrap_or(Path::new(".")).join("tables"));
            let paths = write_csv(&report, &dir)?;
            Ok(paths.iter().map(|p| format!("{}\n", p.display())).collect())
        }
    }
}

/// Dispatches a parsed command line; returns what should go to stdout.
pub async fn run_cli(cli: Cli) -> Result<String, CliError> {
    let global = GlobalOptions {
        seed: cli.seed,
        output_dir: cli.output_dir.clone(),
        allow_partial: cli.allow_partial,
    };
    match cli.command {
        Command::Run { generator } => {
            let path = cli
                .config
                .ok_or_else(|| CliError::new(ErrorClass::Usage, "run requires --config <PATH>"))?;
            Ok(cmd_run(&path, generator.as_deref(), &global).await?.describe())
        }
        Command::Simulate {
            accuracy,
            correlation,
            n_questions,
            generator,
            bootstrap_b,
        } => {
            if cli.config.is_some() {
                return Err(CliError::new(
                    ErrorClass::Usage,
                    "simulate builds its own config; --config is not accepted",
                ));
            }
            let params = SimulateParams {
                accuracy,
                correlation,
                n_questions,
                seed: global.seed.unwrap_or(0),
                generator,
                bootstrap_b,
                output_dir: global.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            };
            Ok(cmd_simulate(&params).await?.describe())
        }
        Command::Analyze {
            datasets,
            bootstrap_b,
            confidence_level,
        } => {
            let (report, path) = cmd_analyze(&datasets, &global, bootstrap_b, confidence_level)?;
            Ok(format!("{}\n{}", path.display(), render_markdown(&report)?))
        }
        Command::Report { report, format } => cmd_report(&report, &format, global.output_dir.as_deref()),
    }
}
