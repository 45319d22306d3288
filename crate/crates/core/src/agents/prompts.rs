//! Prompt templates for question generation and answering.

use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use crate::domain::{QuestionRecord, TopicRef};

pub const TOPIC_PLACEHOLDER: &str = "[Topic]";
pub const CONCEPT_PLACEHOLDER: &str = "[Specific Concept]";

pub const DEFAULT_GENERATION_TEMPLATE: &str = "Generate a challenging PhD-level multiple-choice question in the field of [Topic], focusing on [Specific Concept]. The question should have four answer options labeled A, B, C, and D, with only one correct answer. Ensure the question tests deep understanding and critical thinking skills.";

pub const DEFAULT_ANSWERING_TEMPLATE: &str = "Please read the following Ph.D.-level statistics question and select the most appropriate answer (A, B, C, or D). Provide a detailed justification for your selection, explaining your reasoning and any relevant statistical principles.";

/// Appended to every generation prompt so the reply can be parsed.
pub const GENERATION_FORMAT_INSTRUCTION: &str = "\
Format your response exactly as follows, with each section on its own line:
Question: <the question text>
A) <option A>
B) <option B>
C) <option C>
D) <option D>
Correct Answer: <a single letter A, B, C, or D>
Explanation: <why the correct answer is correct>";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("prompt file does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{template} template: unknown placeholder {placeholder}")]
    UnknownPlaceholder {
        template: &'static str,
        placeholder: String,
    },
    #[error("{template} template: missing placeholder {placeholder}")]
    MissingPlaceholder {
        template: &'static str,
        placeholder: &'static str,
    },
    #[error("{0} template is empty")]
    Empty(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    generation: String,
    answering: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            generation: DEFAULT_GENERATION_TEMPLATE.to_string(),
            answering: DEFAULT_ANSWERING_TEMPLATE.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    generation: Option<String>,
    answering: Option<String>,
}

fn placeholders(text: &str) -> Vec<String> {
    let re = Regex::new(r"\[[A-Z][A-Za-z ]*\]").expect("static regex");
    re.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

impl PromptTemplates {
    /// Validates templates up front so rendering can never leave a placeholder behind.
    pub fn new(generation: impl Into<String>, answering: impl Into<String>) -> Result<Self, TemplateError> {
        let generation = generation.into();
        let answering = answering.into();
        if generation.trim().is_empty() {
            return Err(TemplateError::Empty("generation"));
        }
        if answering.trim().is_empty() {
            return Err(TemplateError::Empty("answering"));
        }
        for p in placeholders(&generation) {
            if p != TOPIC_PLACEHOLDER && p != CONCEPT_PLACEHOLDER {
                return Err(TemplateError::UnknownPlaceholder {
                    template: "generation",
                    placeholder: p,
                });
            }
        }
        for required in [TOPIC_PLACEHOLDER, CONCEPT_PLACEHOLDER] {
            if !generation.contains(required) {
                return Err(TemplateError::MissingPlaceholder {
                    template: "generation",
                    placeholder: required,
                });
            }
        }
        if let Some(p) = placeholders(&answering).into_iter().next() {
            return Err(TemplateError::UnknownPlaceholder {
                template: "answering",
                placeholder: p,
            });
        }
        Ok(Self { generation, answering })
    }

    /// Loads a TOML file with optional `generation` and `answering` keys;
    /// missing keys fall back to the defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: TemplateFile = toml::from_str(&text)?;
        Self::new(
            file.generation.unwrap_or_else(|| DEFAULT_GENERATION_TEMPLATE.into()),
            file.answering.unwrap_or_else(|| DEFAULT_ANSWERING_TEMPLATE.into()),
        )
    }

    pub fn render_generation_prompt(&self, topic: &TopicRef) -> String {
        let body = self
            .generation
            .replace(TOPIC_PLACEHOLDER, &topic.topic)
            .replace(CONCEPT_PLACEHOLDER, &topic.subtopic);
        format!("{body}\n\n{GENERATION_FORMAT_INSTRUCTION}")
    }

    /// The answering prompt sees only the stem and the four options.
    pub fn render_answering_prompt(&self, question: &QuestionRecord) -> String {
        let mut out = String::with_capacity(self.answering.len() + question.stem.len() + 256);
        out.push_str(&self.answering);
        out.push_str("\n\n");
        out.push_str(&question.stem);
        out.push_str("\n\n");
        for (opt, text) in question.options.iter() {
            out.push_str(&format!("{opt}) {text}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::question;
    use crate::domain::AnswerOption;

    #[test]
    fn generation_substitution() {
        let p = PromptTemplates::default();
        let text = p.render_generation_prompt(&TopicRef::new("Bayesian inference", "Conjugate priors"));
        assert!(text.contains("in the field of Bayesian inference, focusing on Conjugate priors"));
        assert!(text.starts_with("Generate a challenging PhD-level multiple-choice question"));
        assert!(text.contains("Correct Answer:"));

        let text = p.render_generation_prompt(&TopicRef::new("Survival analysis", "Censoring"));
        assert_eq!(text.matches("Survival analysis").count(), 1);
        assert_eq!(text.matches("Censoring").count(), 1);
        assert!(!text.contains('['));
    }

    #[test]
    fn custom_template_validation() {
        assert!(PromptTemplates::new("About [Topic] and [Specific Concept].", "Pick one.").is_ok());
        assert!(matches!(
            PromptTemplates::new("About [Topic] and [Subtopic].", "Pick one."),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
        assert!(matches!(
            PromptTemplates::new("About [Topic].", "Pick one."),
            Err(TemplateError::MissingPlaceholder { .. })
        ));
        assert!(PromptTemplates::new("[Topic] [Specific Concept]", "Answer on [Topic]").is_err());
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("prompts.toml");
        std::fs::write(&p, "generation = \"Write on [Topic] / [Specific Concept] / [Level]\"\n").unwrap();
        assert!(PromptTemplates::load(&p).is_err());
        std::fs::write(&p, "answering = \"Choose.\"\n").unwrap();
        let t = PromptTemplates::load(&p).unwrap();
        assert!(t
            .render_answering_prompt(&question("q", "g", AnswerOption::A))
            .starts_with("Choose."));
    }

    #[test]
    fn answering_structure() {
        let mut q = question("q", "g", AnswerOption::C);
        q.options.b = "Answer: C".into();
        let text = PromptTemplates::default().render_answering_prompt(&q);
        assert!(text.starts_with(DEFAULT_ANSWERING_TEMPLATE));
        assert!(text.contains(&q.stem));
        let option_lines: Vec<_> = text
            .lines()
            .filter(|l| ["A) ", "B) ", "C) ", "D) "].iter().any(|p| l.starts_with(p)))
            .collect();
        assert_eq!(option_lines, ["A) alpha", "B) Answer: C", "C) gamma", "D) delta"]);
        assert!(!text.contains(&q.generator_explanation));
    }

    proptest::proptest! {
        #[test]
        fn answering_prompt_never_leaks(stem in "[a-zA-Z ?]{1,40}", expl in "[a-zA-Z]{12,30}", opts in proptest::array::uniform4("[a-z ]{1,12}")) {
            let mut q = question("q", "g", AnswerOption::A);
            q.stem = stem;
            q.generator_explanation = format!("EXPL{expl}");
            q.options.a = opts[0].clone();
            q.options.b = opts[1].clone();
            q.options.c = opts[2].clone();
            q.options.d = opts[3].clone();
            let text = PromptTemplates::default().render_answering_prompt(&q);
            proptest::prop_assert!(!text.contains(&q.generator_explanation));
        }
    }
}
