//! Multi-model multiple-choice question validation without ground truth.
//!
//! One model writes a question together with its own answer; three other
//! models answer it in isolation. Majority-vote consensus, agreement with the
//! question author, a chi-square uniformity test, Fleiss' kappa and bootstrap
//! intervals then quantify how far the answers can be trusted.

pub mod agents;
pub mod cli;
pub mod consensus;
pub mod domain;
pub mod orchestrator;
pub mod scalar;
pub mod seed;
pub mod stats;

pub use scalar::{Real, Scalar};

/// Exact rational used for counting statistics.
pub type Exact = num_rational::Ratio<i64>;

pub type KappaResult64 = stats::KappaResult<f64>;
pub type ExactKappaResult = stats::KappaResult<Exact>;
pub type ChiSquareResult64 = stats::ChiSquareResult<f64>;
pub type BootstrapCi64 = stats::BootstrapCi<f64>;
