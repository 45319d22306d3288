//! Parsing model output: generated questions and selected answer letters.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnswerOption, OptionSet};

/// A parsed question as produced by a generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedQuestion {
    pub stem: String,
    pub options: OptionSet,
    pub correct: AnswerOption,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationParseError {
    #[error("no question text found")]
    MissingQuestion,
    #[error("option {0} is missing")]
    MissingOption(AnswerOption),
    #[error("option {0} appears more than once")]
    DuplicateOption(AnswerOption),
    #[error("option {0} is empty")]
    EmptyOption(AnswerOption),
    #[error("no `Correct Answer: <letter>` line found")]
    MissingCorrectAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no answer option found in response")]
pub struct NoOptionFound;

/// Which extraction rule produced a selected option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionRule {
    /// `Answer: <L>` line.
    AnswerLine = 1,
    /// Option letter followed by `)`, `.` or `:` at a line start.
    LeadingLetter = 2,
    /// First standalone capital A–D.
    StandaloneLetter = 3,
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

fn answer_line_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(
        &R,
        r"(?m)^[\s*_#>]*(?i:final\s+)?(?i:answer)[\s*_]*:[\s*_]*\(?([A-D])\b",
    )
}

fn leading_letter_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?m)^[\s*_]*\(?([A-D])[).:]")
}

fn standalone_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\b([A-D])\b")
}

fn letter(caps: &regex::Captures<'_>) -> AnswerOption {
    let c = caps[1].chars().next().expect("one-letter capture");
    AnswerOption::from_letter(c.to_ascii_uppercase()).expect("pattern only matches A-D")
}

/// Extracts the chosen option. Rules are tried in order and the first match wins.
pub fn parse_selected_option(raw: &str) -> Result<(AnswerOption, ExtractionRule), NoOptionFound> {
    if let Some(c) = answer_line_re().captures(raw) {
        return Ok((letter(&c), ExtractionRule::AnswerLine));
    }
    if let Some(c) = leading_letter_re().captures(raw) {
        return Ok((letter(&c), ExtractionRule::LeadingLetter));
    }
    if let Some(c) = standalone_re().captures(raw) {
        return Ok((letter(&c), ExtractionRule::StandaloneLetter));
    }
    Err(NoOptionFound)
}

/// The response with the `Answer:` line removed when rule 1 matched, trimmed.
pub fn justification_text(raw: &str, rule: ExtractionRule) -> String {
    if rule == ExtractionRule::AnswerLine {
        if let Some(m) = answer_line_re().find(raw) {
            let line_end = raw[m.end()..].find('\n').map_or(raw.len(), |i| m.end() + i);
            let mut rest = String::with_capacity(raw.len());
            rest.push_str(&raw[..m.start()]);
            rest.push_str(&raw[line_end..]);
            let rest = rest.trim();
            if !rest.is_empty() {
                return rest.to_string();
            }
        }
    }
    raw.trim().to_string()
}

enum Section {
    Preamble,
    Stem,
    Option(AnswerOption),
    Explanation,
}

fn strip_decoration(line: &str) -> &str {
    line.trim()
        .trim_matches(|c: char| c == '*' || c == '_' || c == '#')
        .trim()
}

fn header_value<'a>(line: &'a str, names: &[&str]) -> Option<&'a str> {
    let lower = line.to_ascii_lowercase();
    for name in names {
        if lower.starts_with(name) {
            let rest = &line[name.len()..];
            let rest = rest.trim_start_matches(['*', '_', ' ']);
            if let Some(v) = rest.strip_prefix(':') {
                return Some(v.trim_start_matches(['*', '_']).trim());
            }
        }
    }
    None
}

fn option_line(line: &str) -> Option<(AnswerOption, &str)> {
    static R: OnceLock<Regex> = OnceLock::new();
    let r = re(&R, r"^\(?([A-D])[).:]\s*(.*)$");
    let caps = r.captures(line)?;
    let text = caps.get(2).map_or("", |m| m.as_str());
    Some((letter(&caps), text))
}

fn push_line(buf: &mut String, text: &str) {
    if text.is_empty() {
        return;
    }
    if !buf.is_empty() {
        buf.push('\n');
    }
    buf.push_str(text);
}

/// Parses generator output in the sectioned format requested by the
/// generation prompt. A missing `Question:` header is tolerated: any text
/// before the first option line then forms the stem.
pub fn parse_generated_question(raw: &str) -> Result<GeneratedQuestion, GenerationParseError> {
    let mut section = Section::Preamble;
    let mut preamble = String::new();
    let mut stem = String::new();
    let mut saw_question_header = false;
    let mut options: [Option<String>; 4] = Default::default();
    let mut correct = None;
    let mut explanation = String::new();

    for raw_line in raw.lines() {
        let line = strip_decoration(raw_line);
        if let Some(v) = header_value(line, &["question"]) {
            if !saw_question_header && correct.is_none() {
                saw_question_header = true;
                section = Section::Stem;
                push_line(&mut stem, v);
                continue;
            }
        }
        if let Some(v) = header_value(line, &["correct answer", "answer"]) {
            if correct.is_none() {
                let c = v
                    .trim_start_matches('(')
                    .chars()
                    .next()
                    .and_then(AnswerOption::from_letter);
                if c.is_some() {
                    correct = c;
                    section = Section::Preamble;
                    continue;
                }
            }
        }
        if let Some(v) = header_value(line, &["explanation"]) {
            section = Section::Explanation;
            push_line(&mut explanation, v);
            continue;
        }
        if !matches!(section, Section::Explanation) && correct.is_none() {
            if let Some((opt, text)) = option_line(line) {
                if options[opt.index()].is_some() {
                    return Err(GenerationParseError::DuplicateOption(opt));
                }
                options[opt.index()] = Some(text.trim().to_string());
                section = Section::Option(opt);
                continue;
            }
        }
        match section {
            Section::Preamble => push_line(&mut preamble, line),
            Section::Stem => push_line(&mut stem, line),
            Section::Option(o) => {
                let slot = options[o.index()].get_or_insert_with(String::new);
                push_line(slot, line);
            }
            Section::Explanation => push_line(&mut explanation, line),
        }
    }

    if !saw_question_header {
        stem = preamble;
    }
    if stem.trim().is_empty() {
        return Err(GenerationParseError::MissingQuestion);
    }
    let mut texts = Vec::with_capacity(4);
    for opt in AnswerOption::ALL {
        match options[opt.index()].take() {
            None => return Err(GenerationParseError::MissingOption(opt)),
            Some(t) if t.trim().is_empty() => return Err(GenerationParseError::EmptyOption(opt)),
            Some(t) => texts.push(t),
        }
    }
    let correct = correct.ok_or(GenerationParseError::MissingCorrectAnswer)?;
    let mut texts = texts.into_iter();
    let mut next = || texts.next().expect("four options");
    Ok(GeneratedQuestion {
        stem: stem.trim().to_string(),
        options: OptionSet::new(next(), next(), next(), next()),
        correct,
        explanation: explanation.trim().to_string(),
    })
}

/// Renders a question in the format [`parse_generated_question`] reads.
pub fn format_generated_question(q: &GeneratedQuestion) -> String {
    let mut out = format!("Question: {}\n", q.stem);
    for (opt, text) in q.options.iter() {
        out.push_str(&format!("{opt}) {text}\n"));
    }
    out.push_str(&format!(
        "Correct Answer: {}\nExplanation: {}\n",
        q.correct, q.explanation
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use AnswerOption::*;

    #[test]
    fn rule_one_answer_line() {
        assert_eq!(
            parse_selected_option("Answer: C\nBecause…"),
            Ok((C, ExtractionRule::AnswerLine))
        );
        assert_eq!(
            parse_selected_option("blah\n**Answer:** (B)\n"),
            Ok((B, ExtractionRule::AnswerLine))
        );
        assert_eq!(parse_selected_option("answer: D"), Ok((D, ExtractionRule::AnswerLine)));
        // rule 1 wins over an earlier leading letter
        assert_eq!(
            parse_selected_option("A) is wrong\nAnswer: B"),
            Ok((B, ExtractionRule::AnswerLine))
        );
    }

    #[test]
    fn rule_three_mid_line() {
        assert_eq!(
            parse_selected_option("I would pick B) since the estimator…"),
            Ok((B, ExtractionRule::StandaloneLetter))
        );
    }

    #[test]
    fn rule_two_leading() {
        assert_eq!(
            parse_selected_option("Thinking...\nD. Because"),
            Ok((D, ExtractionRule::LeadingLetter))
        );
        assert_eq!(
            parse_selected_option("(C): it is"),
            Ok((C, ExtractionRule::LeadingLetter))
        );
    }

    #[test]
    fn nothing_found() {
        assert_eq!(parse_selected_option("The options all fail."), Err(NoOptionFound));
        assert_eq!(parse_selected_option(""), Err(NoOptionFound));
        assert_eq!(parse_selected_option("Answer: Because E is best"), Err(NoOptionFound));
    }

    #[test]
    fn justification_drops_answer_line() {
        let raw = "Answer: C\nBecause the MLE is biased.";
        assert_eq!(
            justification_text(raw, ExtractionRule::AnswerLine),
            "Because the MLE is biased."
        );
        assert_eq!(
            justification_text(" B fits ", ExtractionRule::StandaloneLetter),
            "B fits"
        );
    }

    const SAMPLE: &str = "\
**Question:** Which prior is conjugate for a Binomial likelihood?
A) Normal
B) Beta
C) Gamma
D) Cauchy
**Correct Answer:** B
**Explanation:** The Beta family is closed under Binomial updating.
It yields a Beta posterior.";

    #[test]
    fn parses_sectioned_output() {
        let q = parse_generated_question(SAMPLE).unwrap();
        assert_eq!(q.stem, "Which prior is conjugate for a Binomial likelihood?");
        assert_eq!(q.options.get(B), "Beta");
        assert_eq!(q.correct, B);
        assert!(q.explanation.ends_with("Beta posterior."));
    }

    #[test]
    fn multi_line_stem_and_no_header() {
        let raw = "Consider a stationary AR(1) process.\nWhich statement holds?\nA. one\nB. two\nC. three\nD. four\nCorrect Answer: (D)\nExplanation: four.";
        let q = parse_generated_question(raw).unwrap();
        assert_eq!(q.stem, "Consider a stationary AR(1) process.\nWhich statement holds?");
        assert_eq!(q.correct, D);
    }

    #[test]
    fn missing_option_named() {
        let raw = SAMPLE.replace("D) Cauchy\n", "");
        assert_eq!(
            parse_generated_question(&raw),
            Err(GenerationParseError::MissingOption(D))
        );
        let raw = SAMPLE.replace("**Correct Answer:** B\n", "");
        assert_eq!(
            parse_generated_question(&raw),
            Err(GenerationParseError::MissingCorrectAnswer)
        );
        assert_eq!(
            parse_generated_question("A) x\nB) y"),
            Err(GenerationParseError::MissingQuestion)
        );
    }

    #[test]
    fn format_round_trip() {
        let q = parse_generated_question(SAMPLE).unwrap();
        assert_eq!(parse_generated_question(&format_generated_question(&q)).unwrap(), q);
    }

    proptest::proptest! {
        #[test]
        fn never_panics(s in "\\PC*") {
            let _ = parse_selected_option(&s);
            let _ = parse_generated_question(&s);
        }

        #[test]
        fn answer_line_always_wins(prefix in "[a-z .]{0,40}", l in 0usize..4) {
            let o = AnswerOption::from_index(l).unwrap();
            let raw = format!("{prefix}\nAnswer: {o}\nreasons");
            proptest::prop_assert_eq!(parse_selected_option(&raw), Ok((o, ExtractionRule::AnswerLine)));
        }
    }
}
