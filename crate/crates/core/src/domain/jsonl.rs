//! Line-delimited JSON persistence for experiment datasets.
//!
//! Line 1 is a header record; every following line is a question or answer
//! record tagged by `kind`. Each record is written with a single `write_all`
//! followed by a flush, so an interrupted run leaves a file whose complete
//! lines are all readable.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnswerRecord, DomainError, ExperimentDataset, ModelId, QuestionId, QuestionRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    experiment_id: String,
    generator_model: ModelId,
    answerer_models: Vec<ModelId>,
    config_snapshot: serde_json::Value,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a Header),
    Question(&'a QuestionRecord),
    Answer(&'a AnswerRecord),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(Header),
    Question(QuestionRecord),
    Answer(AnswerRecord),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    InvalidRecord {
        line: usize,
        #[source]
        source: DomainError,
    },
    #[error("invalid dataset: {0}")]
    Invalid(#[from] DomainError),
    #[error("unsupported schema version {found} (this build reads version {SCHEMA_VERSION})")]
    UnsupportedSchema { found: u64 },
    #[error("line 1: missing header record")]
    MissingHeader,
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Append-only writer used during live runs.
///
/// Records are validated against what has already been written before any
/// bytes reach the file.
pub struct DatasetWriter {
    path: PathBuf,
    file: File,
    roster: ExperimentDataset,
    known: HashSet<QuestionId>,
    answered: HashSet<(QuestionId, ModelId)>,
}

impl DatasetWriter {
    /// Creates (or truncates) `path` and writes the header taken from `dataset`.
    /// Question and answer lists of `dataset` are ignored.
    pub fn create(path: impl AsRef<Path>, dataset: &ExperimentDataset) -> Result<Self, DatasetError> {
        dataset.validate_roster()?;
        let path = path.as_ref().to_path_buf();
        let header = Header {
            schema_version: SCHEMA_VERSION,
            experiment_id: dataset.experiment_id.clone(),
            generator_model: dataset.generator_model.clone(),
            answerer_models: dataset.answerer_models.clone(),
            config_snapshot: dataset.config_snapshot.clone(),
        };
        let line = encode(&LineRef::Header(&header))?;
        let file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut writer = Self {
            path,
            file,
            roster: ExperimentDataset {
                questions: Vec::new(),
                answers: Vec::new(),
                ..dataset.clone()
            },
            known: HashSet::new(),
            answered: HashSet::new(),
        };
        writer.write_line(&line)?;
        Ok(writer)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append_question(&mut self, q: &QuestionRecord) -> Result<(), DatasetError> {
        self.roster.check_question(q, &self.known)?;
        let line = encode(&LineRef::Question(q))?;
        self.write_line(&line)?;
        self.known.insert(q.question_id.clone());
        Ok(())
    }

    pub fn append_answer(&mut self, a: &AnswerRecord) -> Result<(), DatasetError> {
        self.roster.check_answer(a, &self.known, &self.answered)?;
        let line = encode(&LineRef::Answer(a))?;
        self.write_line(&line)?;
        self.answered.insert((a.question_id.clone(), a.answerer_model.clone()));
        Ok(())
    }

    fn write_line(&mut self, line: &[u8]) -> Result<(), DatasetError> {
        let path = self.path.clone();
        self.file.write_all(line).map_err(io_err(&path))?;
        self.file.flush().map_err(io_err(&path))
    }
}

fn encode(line: &LineRef<'_>) -> Result<Vec<u8>, DatasetError> {
    let mut buf = serde_json::to_vec(line)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Writes a whole dataset: header, then every question, then every answer,
/// each in list order. Nothing is created if the dataset is invalid.
pub fn write_dataset(dataset: &ExperimentDataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    dataset.validate()?;
    let mut w = DatasetWriter::create(path, dataset)?;
    for q in &dataset.questions {
        w.append_question(q)?;
    }
    for a in &dataset.answers {
        w.append_answer(a)?;
    }
    Ok(())
}

/// Reads and re-validates a dataset. Incomplete runs load fine; check
/// [`ExperimentDataset::is_partial`].
pub fn read_dataset(path: impl AsRef<Path>) -> Result<ExperimentDataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&text)
}

fn parse_dataset(text: &str) -> Result<ExperimentDataset, DatasetError> {
    let mut lines = text.split_inclusive('\n').enumerate().map(|(i, l)| (i + 1, l));

    let (_, first) = lines.next().ok_or(DatasetError::MissingHeader)?;
    let header_value: serde_json::Value = serde_json::from_str(first).map_err(|e| DatasetError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header_value.get("kind").and_then(|k| k.as_str()) != Some("header") {
        return Err(DatasetError::MissingHeader);
    }
    match header_value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(DatasetError::UnsupportedSchema { found: v }),
        None => {
            return Err(DatasetError::Malformed {
                line: 1,
                message: "header lacks schema_version".into(),
            })
        }
    }
    let header = match serde_json::from_value::<Line>(header_value) {
        Ok(Line::Header(h)) => h,
        Ok(_) => return Err(DatasetError::MissingHeader),
        Err(e) => {
            return Err(DatasetError::Malformed {
                line: 1,
                message: e.to_string(),
            })
        }
    };

    let mut ds = ExperimentDataset {
        experiment_id: header.experiment_id,
        generator_model: header.generator_model,
        answerer_models: header.answerer_models,
        questions: Vec::new(),
        answers: Vec::new(),
        config_snapshot: header.config_snapshot,
    };
    ds.validate_roster()
        .map_err(|source| DatasetError::InvalidRecord { line: 1, source })?;

    let mut known = HashSet::new();
    let mut answered = HashSet::new();
    for (line_no, raw) in lines {
        let record: Line = serde_json::from_str(raw).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let invalid = |source| DatasetError::InvalidRecord { line: line_no, source };
        match record {
            Line::Header(_) => {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    message: "second header record".into(),
                })
            }
            Line::Question(q) => {
                ds.check_question(&q, &known).map_err(invalid)?;
                known.insert(q.question_id.clone());
                ds.questions.push(q);
            }
            Line::Answer(a) => {
                ds.check_answer(&a, &known, &answered).map_err(invalid)?;
                answered.insert((a.question_id.clone(), a.answerer_model.clone()));
                ds.answers.push(a);
            }
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::AnswerOption;
    use super::*;

    #[test]
    fn empty_dataset_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = dataset(0);
        write_dataset(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("{\"kind\":\"header\",\"schema_version\":1,"));
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn one_question_five_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = dataset(1);
        write_dataset(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn unknown_question_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut ds = dataset(1);
        ds.answers[0].question_id = QuestionId::from("nope");
        let err = write_dataset(&ds, &path).unwrap_err();
        assert!(matches!(err, DatasetError::Invalid(DomainError::UnknownQuestion(_))));
        assert!(!path.exists());
    }

    #[test]
    fn duplicate_answer_is_named() {
        let ds = dataset(1);
        let mut text = String::new();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&ds, &path).unwrap();
        text.push_str(&std::fs::read_to_string(&path).unwrap());
        let last = text.lines().last().unwrap().to_string();
        text.push_str(&last);
        text.push('\n');
        let err = parse_dataset(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 6:"), "{msg}");
        assert!(msg.contains("duplicate answer from model 'm3'"), "{msg}");
    }

    #[test]
    fn truncated_tail_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&dataset(1), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = &text[..text.len() - 20];
        match parse_dataset(cut).unwrap_err() {
            DatasetError::Malformed { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn schema_version_checked() {
        let text = r#"{"kind":"header","schema_version":7,"experiment_id":"e","generator_model":"g","answerer_models":["a","b","c"],"config_snapshot":null}"#;
        assert!(matches!(
            parse_dataset(text),
            Err(DatasetError::UnsupportedSchema { found: 7 })
        ));
        assert!(matches!(parse_dataset(""), Err(DatasetError::MissingHeader)));
    }

    #[test]
    fn writer_rejects_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = dataset(0);
        let mut w = DatasetWriter::create(&path, &ds).unwrap();
        let q = question("q0", "gen", AnswerOption::A);
        let stray = answer(&q, "m1", AnswerOption::A);
        assert!(w.append_answer(&stray).is_err());
        w.append_question(&q).unwrap();
        w.append_answer(&stray).unwrap();
        let foreign = question("q1", "other", AnswerOption::A);
        assert!(w.append_question(&foreign).is_err());
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.questions.len(), 1);
        assert_eq!(back.answers.len(), 1);
        assert!(back.is_partial());
    }
}
