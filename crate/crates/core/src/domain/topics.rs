//! Topic map: the (topic, subtopic) pairs questions are drawn from.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::TopicRef;

/// The shipped default map.
pub const DEFAULT_TOPIC_MAP: &str = include_str!("../../data/topics.toml");

#[derive(Debug, Error)]
pub enum TopicMapError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("topic map does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("topic map lists no topics")]
    Empty,
    #[error("topic '{0}' lists no subtopics")]
    NoSubtopics(String),
    #[error("duplicate topic '{0}'")]
    DuplicateTopic(String),
    #[error("topic '{topic}': duplicate subtopic '{subtopic}'")]
    DuplicateSubtopic { topic: String, subtopic: String },
    #[error("topic or subtopic name is blank")]
    BlankName,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicFile {
    #[serde(default)]
    topic: Vec<TopicEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicEntry {
    name: String,
    subtopics: Vec<String>,
}

/// Ordered topic → subtopics map. Order is file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicMap {
    topics: Vec<(String, Vec<String>)>,
}

impl TopicMap {
    pub fn parse(text: &str) -> Result<Self, TopicMapError> {
        let file: TopicFile = toml::from_str(text)?;
        if file.topic.is_empty() {
            return Err(TopicMapError::Empty);
        }
        let mut seen = HashSet::new();
        let mut topics = Vec::with_capacity(file.topic.len());
        for entry in file.topic {
            if entry.name.trim().is_empty() {
                return Err(TopicMapError::BlankName);
            }
            if !seen.insert(entry.name.clone()) {
                return Err(TopicMapError::DuplicateTopic(entry.name));
            }
            if entry.subtopics.is_empty() {
                return Err(TopicMapError::NoSubtopics(entry.name));
            }
            let mut subs = HashSet::new();
            for s in &entry.subtopics {
                if s.trim().is_empty() {
                    return Err(TopicMapError::BlankName);
                }
                if !subs.insert(s) {
                    return Err(TopicMapError::DuplicateSubtopic {
                        topic: entry.name.clone(),
                        subtopic: s.clone(),
                    });
                }
            }
            topics.push((entry.name, entry.subtopics));
        }
        Ok(Self { topics })
    }

    pub fn default_map() -> Self {
        Self::parse(DEFAULT_TOPIC_MAP).expect("shipped topic map is valid")
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(|(t, _)| t.as_str())
    }

    pub fn subtopics(&self, topic: &str) -> Option<&[String]> {
        self.topics.iter().find(|(t, _)| t == topic).map(|(_, s)| s.as_slice())
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn contains(&self, r: &TopicRef) -> bool {
        self.subtopics(&r.topic).is_some_and(|s| s.contains(&r.subtopic))
    }

    /// Every (topic, subtopic) pair in file order.
    pub fn pairs(&self) -> Vec<TopicRef> {
        self.topics
            .iter()
            .flat_map(|(t, subs)| subs.iter().map(move |s| TopicRef::new(t.clone(), s.clone())))
            .collect()
    }
}

pub fn load_topic_map(path: impl AsRef<Path>) -> Result<TopicMap, TopicMapError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TopicMapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    TopicMap::parse(&text)
}
