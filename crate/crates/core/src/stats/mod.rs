//! Significance and agreement statistics: chi-square uniformity test,
//! Fleiss' kappa and percentile bootstrap intervals.

mod bootstrap;
mod chi_square;
mod kappa;
pub mod special;

use thiserror::Error;

pub use bootstrap::{
    bootstrap_ci, compare_cis, nearest_rank, BootstrapCi, CiRelation, DEFAULT_RESAMPLES, MIN_RESAMPLES, RNG_ALGORITHM,
};
pub use chi_square::{chi_square_sf, chi_square_test, uniform_statistic, ChiSquareResult, CATEGORIES};
pub use kappa::{fleiss_kappa, AgreementBand, KappaResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no observations")]
    Empty,
    #[error("observed counts sum to {found}, expected {expected}")]
    CountMismatch { expected: u64, found: u64 },
    #[error("chi-square statistic must be non-negative, got {0}")]
    NegativeStatistic(f64),
    #[error("degrees of freedom must be at least 1")]
    InvalidDegreesOfFreedom,
    #[error("row {row} has {found} ratings, expected {expected}")]
    RaggedRow { row: usize, expected: u64, found: u64 },
    #[error("need at least 2 raters per subject, got {0}")]
    TooFewRaters(u64),
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("need at least {MIN_RESAMPLES} bootstrap resamples, got {0}")]
    TooFewResamples(usize),
    #[error("cannot compare intervals at different levels ({0} vs {1})")]
    LevelMismatch(f64, f64),
}
