//! Majority-vote consensus and reliability for three answering models.
//!
//! With three voters over four options, an option holding at least two votes
//! is necessarily unique, so consensus is well defined except on a 1-1-1
//! split, where it is absent.

use std::collections::HashSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnswerOption, AnswerRecord, ExperimentDataset, ModelId, QuestionId, ANSWERERS_PER_QUESTION};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("expected {ANSWERERS_PER_QUESTION} answers, got {0}")]
    WrongCount(usize),
    #[error("model '{0}' answered more than once")]
    DuplicateAnswerer(ModelId),
    #[error("answers belong to different questions ({0} and {1})")]
    MixedQuestions(QuestionId, QuestionId),
    #[error("question {0} does not have all {ANSWERERS_PER_QUESTION} answers")]
    Incomplete(QuestionId),
    #[error("dataset has no questions")]
    Empty,
}

/// Votes per option, indexed by [`AnswerOption::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Tally(pub [u32; 4]);

impl Tally {
    pub fn from_selections(selections: impl IntoIterator<Item = AnswerOption>) -> Self {
        let mut t = [0u32; 4];
        for s in selections {
            t[s.index()] += 1;
        }
        Self(t)
    }

    pub fn count(&self, option: AnswerOption) -> u32 {
        self.0[option.index()]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_count(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgreementCategory {
    FullAgreement,
    PartialAgreement,
    NoAgreement,
}

/// Counts the three answers for one question.
pub fn tally_answers(answers: &[&AnswerRecord]) -> Result<Tally, ConsensusError> {
    if answers.len() != ANSWERERS_PER_QUESTION {
        return Err(ConsensusError::WrongCount(answers.len()));
    }
    let qid = &answers[0].question_id;
    let mut seen = HashSet::new();
    for a in answers {
        if &a.question_id != qid {
            return Err(ConsensusError::MixedQuestions(qid.clone(), a.question_id.clone()));
        }
        if !seen.insert(&a.answerer_model) {
            return Err(ConsensusError::DuplicateAnswerer(a.answerer_model.clone()));
        }
    }
    Ok(Tally::from_selections(answers.iter().map(|a| a.selected)))
}

pub fn classify_agreement(tally: &Tally) -> AgreementCategory {
    match tally.max_count() {
        3.. => AgreementCategory::FullAgreement,
        2 => AgreementCategory::PartialAgreement,
        _ => AgreementCategory::NoAgreement,
    }
}

/// The option with at least two votes, if any.
pub fn consensus_answer(tally: &Tally) -> Option<AnswerOption> {
    AnswerOption::ALL.into_iter().find(|&o| tally.count(o) >= 2)
}

pub fn reliability_bit(consensus: Option<AnswerOption>, generator_answer: AnswerOption) -> bool {
    consensus == Some(generator_answer)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub question_id: QuestionId,
    pub tally: Tally,
    pub category: AgreementCategory,
    pub consensus_answer: Option<AnswerOption>,
    pub reliable: bool,
}

impl ConsensusResult {
    pub fn from_tally(question_id: QuestionId, tally: Tally, generator_answer: AnswerOption) -> Self {
        let consensus = consensus_answer(&tally);
        Self {
            question_id,
            tally,
            category: classify_agreement(&tally),
            consensus_answer: consensus,
            reliable: reliability_bit(consensus, generator_answer),
        }
    }
}

/// Consensus for every question, in dataset order. Fails on any incomplete question.
pub fn evaluate_dataset(dataset: &ExperimentDataset) -> Result<Vec<ConsensusResult>, ConsensusError> {
    dataset
        .questions
        .iter()
        .map(|q| {
            let answers = dataset.answers_for(&q.question_id);
            if answers.len() < ANSWERERS_PER_QUESTION {
                return Err(ConsensusError::Incomplete(q.question_id.clone()));
            }
            let tally = tally_answers(&answers)?;
            Ok(ConsensusResult::from_tally(
                q.question_id.clone(),
                tally,
                q.generator_answer,
            ))
        })
        .collect()
}

/// Category and reliability counts for one experiment.
///
/// Counts are the source of truth; rates are derived on demand in any
/// [`Scalar`], so `full + partial + none == 1` holds exactly over rationals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub generator_model: ModelId,
    pub n_questions: u64,
    pub full_count: u64,
    pub partial_count: u64,
    pub none_count: u64,
    pub reliable_count: u64,
    pub full_rate: f64,
    pub partial_rate: f64,
    pub none_rate: f64,
    pub majority_vote_rate: f64,
    pub reliability_rate: f64,
}

impl ExperimentSummary {
    pub fn from_results(generator_model: ModelId, results: &[ConsensusResult]) -> Result<Self, ConsensusError> {
        if results.is_empty() {
            return Err(ConsensusError::Empty);
        }
        let count = |c: AgreementCategory| results.iter().filter(|r| r.category == c).count() as u64;
        let mut s = Self {
            generator_model,
            n_questions: results.len() as u64,
            full_count: count(AgreementCategory::FullAgreement),
            partial_count: count(AgreementCategory::PartialAgreement),
            none_count: count(AgreementCategory::NoAgreement),
            reliable_count: results.iter().filter(|r| r.reliable).count() as u64,
            full_rate: 0.0,
            partial_rate: 0.0,
            none_rate: 0.0,
            majority_vote_rate: 0.0,
            reliability_rate: 0.0,
        };
        s.full_rate = s.full_rate_as();
        s.partial_rate = s.partial_rate_as();
        s.none_rate = s.none_rate_as();
        s.majority_vote_rate = s.majority_vote_rate_as();
        s.reliability_rate = s.reliability_rate_as();
        Ok(s)
    }

    pub fn majority_count(&self) -> u64 {
        self.full_count + self.partial_count
    }

    fn rate<T: Scalar>(&self, k: u64) -> T {
        T::from_count(k) / T::from_count(self.n_questions)
    }

    pub fn full_rate_as<T: Scalar>(&self) -> T {
        self.rate(self.full_count)
    }

    pub fn partial_rate_as<T: Scalar>(&self) -> T {
        self.rate(self.partial_count)
    }

    pub fn none_rate_as<T: Scalar>(&self) -> T {
        self.rate(self.none_count)
    }

    pub fn majority_vote_rate_as<T: Scalar>(&self) -> T {
        self.rate(self.majority_count())
    }

    pub fn reliability_rate_as<T: Scalar>(&self) -> T {
        self.rate(self.reliable_count)
    }

    /// Exact category rates `(full, partial, none)`.
    pub fn exact_category_rates(&self) -> (Ratio<i64>, Ratio<i64>, Ratio<i64>) {
        (self.full_rate_as(), self.partial_rate_as(), self.none_rate_as())
    }
}

/// Summary of a complete dataset.
pub fn summarize_experiment(dataset: &ExperimentDataset) -> Result<ExperimentSummary, ConsensusError> {
    let results = evaluate_dataset(dataset)?;
    ExperimentSummary::from_results(dataset.generator_model.clone(), &results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::{answer, question};
    use crate::domain::AnswerOption::{A, B, C, D};
    use proptest::prelude::*;

    fn t(sel: &[AnswerOption]) -> Tally {
        Tally::from_selections(sel.iter().copied())
    }

    #[test]
    fn tallies() {
        let q = question("q", "g", A);
        let a = [answer(&q, "m1", A), answer(&q, "m2", A), answer(&q, "m3", B)];
        let refs: Vec<_> = a.iter().collect();
        assert_eq!(tally_answers(&refs).unwrap(), Tally([2, 1, 0, 0]));
        assert_eq!(t(&[A, A, A]), Tally([3, 0, 0, 0]));
        assert_eq!(t(&[A, B, C]), Tally([1, 1, 1, 0]));
    }

    #[test]
    fn tally_errors() {
        let q = question("q", "g", A);
        let q2 = question("q2", "g", A);
        let a = [
            answer(&q, "m1", A),
            answer(&q, "m1", A),
            answer(&q, "m3", B),
            answer(&q2, "m2", A),
        ];
        assert_eq!(tally_answers(&[&a[0], &a[2]]), Err(ConsensusError::WrongCount(2)));
        assert!(matches!(
            tally_answers(&[&a[0], &a[1], &a[2]]),
            Err(ConsensusError::DuplicateAnswerer(_))
        ));
        assert!(matches!(
            tally_answers(&[&a[0], &a[2], &a[3]]),
            Err(ConsensusError::MixedQuestions(..))
        ));
    }

    #[test]
    fn categories_and_consensus() {
        assert_eq!(classify_agreement(&t(&[A, A, A])), AgreementCategory::FullAgreement);
        assert_eq!(classify_agreement(&t(&[B, B, D])), AgreementCategory::PartialAgreement);
        assert_eq!(classify_agreement(&t(&[A, B, C])), AgreementCategory::NoAgreement);
        assert_eq!(consensus_answer(&t(&[C, C, A])), Some(C));
        assert_eq!(consensus_answer(&t(&[A, A, A])), Some(A));
        assert_eq!(consensus_answer(&t(&[A, B, D])), None);
    }

    #[test]
    fn reliability() {
        assert!(reliability_bit(Some(C), C));
        assert!(!reliability_bit(Some(C), A));
        assert!(!reliability_bit(None, A));
    }

    #[test]
    fn hand_built_ten_questions() {
        // Tallies chosen by hand; generator answer is A throughout.
        //  #  votes   category  consensus  reliable
        //  0  A A A   full      A          1
        //  1  B B B   full      B          0
        //  2  A A B   partial   A          1
        //  3  A B B   partial   B          0
        //  4  C C D   partial   C          0
        //  5  A B C   none      -          0
        //  6  B C D   none      -          0
        //  7  A A D   partial   A          1
        //  8  D D D   full      D          0
        //  9  A A A   full      A          1
        // full 4/10, partial 4/10, none 2/10, majority 8/10, reliable 4/10
        let votes = [
            [A, A, A],
            [B, B, B],
            [A, A, B],
            [A, B, B],
            [C, C, D],
            [A, B, C],
            [B, C, D],
            [A, A, D],
            [D, D, D],
            [A, A, A],
        ];
        let mut ds = crate::domain::fixtures::dataset(0);
        for (i, v) in votes.iter().enumerate() {
            let q = question(&format!("q{i}"), "gen", A);
            for (m, s) in ["m1", "m2", "m3"].iter().zip(v) {
                ds.answers.push(answer(&q, m, *s));
            }
            ds.questions.push(q);
        }
        let s = summarize_experiment(&ds).unwrap();
        assert_eq!((s.full_count, s.partial_count, s.none_count), (4, 4, 2));
        assert_eq!(s.full_rate, 0.4);
        assert_eq!(s.partial_rate, 0.4);
        assert_eq!(s.none_rate, 0.2);
        assert_eq!(s.majority_vote_rate, 0.8);
        assert_eq!(s.reliability_rate, 0.4);
        let (f, p, n) = s.exact_category_rates();
        assert_eq!(f + p + n, Ratio::from_integer(1));
    }

    #[test]
    fn incomplete_dataset_rejected() {
        let mut ds = crate::domain::fixtures::dataset(2);
        ds.answers.pop();
        assert!(matches!(summarize_experiment(&ds), Err(ConsensusError::Incomplete(_))));
        let empty = crate::domain::fixtures::dataset(0);
        assert_eq!(summarize_experiment(&empty), Err(ConsensusError::Empty));
    }

    fn opt() -> impl Strategy<Value = AnswerOption> {
        (0usize..4).prop_map(|i| AnswerOption::from_index(i).unwrap())
    }

    proptest! {
        #[test]
        fn permutation_invariance(a in opt(), b in opt(), c in opt(), g in opt()) {
            let base = ConsensusResult::from_tally("q".into(), t(&[a, b, c]), g);
            for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                prop_assert_eq!(&ConsensusResult::from_tally("q".into(), t(&perm), g), &base);
            }
        }

        #[test]
        fn relabeling_equivariance(a in opt(), b in opt(), c in opt(), g in opt(), shift in 1usize..4, swap in any::<bool>()) {
            let relabel = |o: AnswerOption| {
                let mut i = (o.index() + shift) % 4;
                if swap { i = 3 - i; }
                AnswerOption::from_index(i).unwrap()
            };
            let base = ConsensusResult::from_tally("q".into(), t(&[a, b, c]), g);
            let moved = ConsensusResult::from_tally("q".into(), t(&[relabel(a), relabel(b), relabel(c)]), relabel(g));
            prop_assert_eq!(moved.category, base.category);
            prop_assert_eq!(moved.reliable, base.reliable);
            prop_assert_eq!(moved.consensus_answer, base.consensus_answer.map(relabel));
        }

        #[test]
        fn majority_dominates_reliability(votes in proptest::collection::vec((opt(), opt(), opt(), opt()), 1..60)) {
            let results: Vec<_> = votes.iter().enumerate()
                .map(|(i, (a, b, c, g))| ConsensusResult::from_tally(QuestionId(i.to_string()), t(&[*a, *b, *c]), *g))
                .collect();
            let s = ExperimentSummary::from_results("g".into(), &results).unwrap();
            prop_assert!(s.majority_vote_rate >= s.reliability_rate);
            let (f, p, n) = s.exact_category_rates();
            prop_assert_eq!(f + p + n, Ratio::from_integer(1));
        }
    }
}
