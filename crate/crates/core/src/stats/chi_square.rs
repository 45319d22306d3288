//! Chi-square goodness of fit against a uniform answer distribution.

use serde::{Deserialize, Serialize};

use super::special::gamma_q;
use super::StatsError;
use crate::scalar::Real;

/// Number of answer options.
pub const CATEGORIES: usize = 4;

/// Upper tail `P(X > statistic)` of a chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf<F: Real>(statistic: F, df: u32) -> Result<F, StatsError> {
    if df == 0 {
        return Err(StatsError::InvalidDegreesOfFreedom);
    }
    if statistic.is_nan() || statistic < F::zero() {
        return Err(StatsError::NegativeStatistic(crate::scalar::Scalar::to_f64(statistic)));
    }
    let half = F::lit(0.5);
    let p = gamma_q(F::lit(df as f64) * half, statistic * half);
    Ok(p.max(F::zero()).min(F::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult<F> {
    pub statistic: F,
    pub df: u32,
    pub p_value: F,
    /// Pooled answer counts, indexed by option.
    pub observed: [u64; CATEGORIES],
    /// Expected count per option under uniform selection.
    pub expected: F,
}

/// Statistic `Σ (O_k − E)² / E` for a uniform expectation over `observed.len()` categories.
pub fn uniform_statistic<F: Real>(observed: &[u64]) -> Result<(F, F), StatsError> {
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::Empty);
    }
    if observed.len() < 2 {
        return Err(StatsError::InvalidDegreesOfFreedom);
    }
    let expected = F::from_count(total) / F::from_count(observed.len() as u64);
    let stat = observed.iter().fold(F::zero(), |acc, &o| {
        let diff = F::from_count(o) - expected;
        acc + diff * diff / expected
    });
    Ok((stat, expected))
}

/// Tests the pooled answer-option distribution of `n_questions × n_answerers`
/// answers against uniform selection over A–D.
pub fn chi_square_test<F: Real>(
    observed: [u64; CATEGORIES],
    n_questions: u64,
    n_answerers: u64,
) -> Result<ChiSquareResult<F>, StatsError> {
    if n_questions == 0 {
        return Err(StatsError::Empty);
    }
    let total: u64 = observed.iter().sum();
    let want = n_questions * n_answerers;
    if total != want {
        return Err(StatsError::CountMismatch {
            expected: want,
            found: total,
        });
    }
    let (statistic, expected) = uniform_statistic::<F>(&observed)?;
    let df = (CATEGORIES - 1) as u32;
    Ok(ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
        observed,
        expected,
    })
}
