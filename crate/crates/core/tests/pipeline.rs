use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use mcq_consensus::agents::{AgentConfig, ChatRequest, ReqwestTransport, Transport, TransportFailure};
use mcq_consensus::cli::execute_config;
use mcq_consensus::domain::{read_dataset, ModelId};
use mcq_consensus::orchestrator::{ClockMode, Orchestrator, Rotation, RunConfig, RunError};
use serde_json::{json, Value};

fn scripted_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/scripted-rotation.toml")
}

fn load(out: &Path) -> RunConfig {
    let mut c = RunConfig::load(scripted_config()).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

fn transport() -> Arc<dyn Transport> {
    Arc::new(ReqwestTransport::new())
}

fn bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[tokio::test]
async fn scripted_single_experiment_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut runs = Vec::new();
    for dir in [a.path(), b.path()] {
        let mut c = load(dir);
        c.n_questions = 2;
        let orch = Orchestrator::new(c, transport()).unwrap();
        runs.push(orch.run_experiment(&"alpha".into()).await.unwrap());
    }
    assert_eq!(runs[0].dataset.questions.len(), 2);
    assert_eq!(runs[0].dataset.answers.len(), 6);
    assert_eq!(
        std::fs::read(&runs[0].path).unwrap(),
        std::fs::read(&runs[1].path).unwrap()
    );
}

#[tokio::test]
async fn rotation_uses_every_model_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = load(dir.path());
    c.n_questions = 1;
    let arts = execute_config(c, transport()).await.unwrap();
    let gens: Vec<_> = arts
        .outcomes
        .iter()
        .map(|o| o.dataset.generator_model.to_string())
        .collect();
    assert_eq!(gens, ["alpha", "beta", "gamma", "delta"]);
    for o in &arts.outcomes {
        assert!(!o.dataset.answerer_models.contains(&o.dataset.generator_model));
        assert_eq!(read_dataset(&o.path).unwrap(), o.dataset);
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(&arts.manifest).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 4);
    assert!(manifest["failure"].is_null());
    // alpha: 1 generation + 1 answer in each of the other three runs
    assert_eq!(manifest["requests"]["alpha"], json!(4));
}

#[tokio::test]
async fn rotation_with_same_seed_repeats_and_other_seed_differs() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    execute_config(load(a.path()), transport()).await.unwrap();
    execute_config(load(b.path()), transport()).await.unwrap();
    assert_eq!(bytes(a.path()), bytes(b.path()));
    let mut other = load(c.path());
    other.seed += 1;
    execute_config(other, transport()).await.unwrap();
    assert_ne!(bytes(a.path()), bytes(c.path()));
}

#[tokio::test]
async fn failure_in_third_run_keeps_first_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = load(dir.path());
    c.n_questions = 1;
    // gamma answers once in each of runs 1 and 2, then fails generating run 3
    c.models[2].scripted.as_mut().unwrap().fail_after_calls = Some(2);
    let err = execute_config(c, transport()).await.unwrap_err();
    assert!(err.message.contains("'gamma'"), "{}", err.message);
    assert_eq!(err.class.as_str(), "transport");

    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for r in runs {
        let ds = read_dataset(dir.path().join(r["file"].as_str().unwrap())).unwrap();
        assert!(!ds.is_partial());
    }
    assert!(manifest["failure"].as_str().unwrap().contains("gamma"));
}

#[tokio::test]
async fn aborted_run_leaves_partial_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = load(dir.path());
    c.n_questions = 10;
    c.rotation = Rotation::SingleGenerator { model: "alpha".into() };
    // delta stops answering after 4 questions
    c.models[3].scripted.as_mut().unwrap().fail_after_calls = Some(4);
    let orch = Orchestrator::new(c, transport()).unwrap();
    let err = orch.run_experiment(&"alpha".into()).await.unwrap_err();
    assert!(matches!(err, RunError::Agent { ref generator, .. } if generator.as_str() == "alpha"));

    let file = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let ds = read_dataset(&file).unwrap();
    assert!(ds.is_partial());
    assert_eq!(ds.questions.len(), 5);
    assert_eq!(ds.complete_questions().len(), 4);
    // the other two answers to question 5 were kept
    assert_eq!(ds.answers.len(), 4 * 3 + 2);
}

#[test]
fn killed_process_leaves_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = std::process::Command::new(env!("CARGO_BIN_EXE_mcq-consensus"))
        .args([
            "--output-dir",
            dir.path().to_str().unwrap(),
            "simulate",
            "--generator",
            "sim-1",
            "--n-questions",
            "10000000",
        ])
        .spawn()
        .unwrap();
    let deadline = std::time::Instant::now() + Duration::from_secs(20);
    let file = loop {
        let found = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.extension().is_some_and(|e| e == "jsonl"));
        if let Some(f) = found {
            if std::fs::read_to_string(&f).unwrap_or_default().lines().count() > 50 {
                break f;
            }
        }
        assert!(std::time::Instant::now() < deadline, "run produced no records");
        std::thread::sleep(Duration::from_millis(20));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    let ds = read_dataset(&file).unwrap();
    let complete = ds.complete_questions().len();
    assert!(complete >= 12, "{complete}");
    assert!(ds.questions.len() - complete <= 1);
}

/// Records every request and answers with canned model output.
struct Recorder {
    seen: Mutex<Vec<ChatRequest>>,
}

const GENERATED: &str = "Question: Stem number {n}?\nA) a{n}\nB) b{n}\nC) c{n}\nD) d{n}\nCorrect Answer: D\nExplanation: secret-explanation-{n}";

#[async_trait]
impl Transport for Recorder {
    async fn post(&self, req: &ChatRequest, _timeout: Duration) -> Result<Value, TransportFailure> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(req.clone());
        let prompt = req.body["messages"][0]["content"].as_str().unwrap_or_default();
        let text = if prompt.starts_with("Generate a challenging") {
            GENERATED.replace("{n}", &seen.len().to_string())
        } else {
            format!("Answer: A\njustification-{}", seen.len())
        };
        Ok(json!({ "choices": [{ "message": { "content": text } }] }))
    }
}

#[tokio::test]
async fn answering_requests_are_isolated() {
    std::env::set_var("MCQ_ISOLATION_TEST_KEY", "k");
    let dir = tempfile::tempdir().unwrap();
    let models = ["g", "x", "y", "z"]
        .map(|m| AgentConfig::http(m, format!("http://127.0.0.1:9/{m}"), "MCQ_ISOLATION_TEST_KEY"))
        .to_vec();
    let mut c = RunConfig::new(models);
    c.n_questions = 5;
    c.output_dir = dir.path().to_path_buf();
    c.clock = ClockMode::Logical;
    c.rotation = Rotation::SingleGenerator { model: "g".into() };
    let recorder = Arc::new(Recorder {
        seen: Mutex::new(Vec::new()),
    });
    let orch = Orchestrator::new(c, recorder.clone()).unwrap();
    let out = orch.run_experiment(&ModelId::from("g")).await.unwrap();
    assert_eq!(out.dataset.answers.len(), 15);

    let seen = recorder.seen.lock().unwrap();
    let answering: Vec<_> = seen
        .iter()
        .filter(|r| r.url.ends_with("/x") || r.url.ends_with("/y") || r.url.ends_with("/z"))
        .collect();
    assert_eq!(answering.len(), 15);
    for r in &answering {
        let messages = r.body["messages"].as_array().unwrap();
        assert_eq!(messages.len(), 1, "no chat history is carried");
        let prompt = messages[0]["content"].as_str().unwrap();
        let stems = out
            .dataset
            .questions
            .iter()
            .filter(|q| prompt.contains(&q.stem))
            .count();
        assert_eq!(stems, 1, "exactly one question per request");
        assert!(!prompt.contains("justification-"), "no other answer leaks in");
        assert!(!prompt.contains("secret-explanation"), "generator explanation withheld");
        assert!(!prompt.contains("Correct Answer"), "generator answer withheld");
    }
    // the three answerers see the same prompt for the same question
    for q in &out.dataset.questions {
        let prompts: Vec<_> = answering
            .iter()
            .map(|r| r.body["messages"][0]["content"].as_str().unwrap())
            .filter(|p| p.contains(&q.stem))
            .collect();
        assert_eq!(prompts.len(), 3);
        assert!(prompts.iter().all(|p| *p == prompts[0]));
    }
}
