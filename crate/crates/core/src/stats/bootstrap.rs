//! Seeded percentile bootstrap for the mean of a per-question series.
//!
//! Resample `b` draws its indices from a ChaCha8 generator keyed by the seed
//! with stream number `b`, so results do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::scalar::Scalar;

/// Recorded in reports so runs can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64(seed) with stream = resample index (rand_chacha 0.9)";

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi<T> {
    pub lower: T,
    pub upper: T,
    pub point_estimate: T,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiRelation {
    Overlapping,
    Disjoint,
}

fn mean<T: Scalar>(xs: impl Iterator<Item = T>, n: usize) -> T {
    xs.fold(T::zero(), |acc, x| acc + x) / T::from_count(n as u64)
}

/// Nearest-rank percentile of sorted data: the smallest value with at least
/// `p·n` values at or below it.
pub fn nearest_rank<T: Copy>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    // tolerate representation error in p·n, e.g. 0.975·10000
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

pub fn bootstrap_ci<T: Scalar>(
    series: &[T],
    level: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapCi<T>, StatsError> {
    if series.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if n_resamples < MIN_RESAMPLES {
        return Err(StatsError::TooFewResamples(n_resamples));
    }
    let n = series.len();
    let mut means: Vec<T> = (0..n_resamples)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            mean((0..n).map(|_| series[rng.random_range(0..n)]), n)
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let alpha = 1.0 - level;
    Ok(BootstrapCi {
        lower: nearest_rank(&means, alpha / 2.0),
        upper: nearest_rank(&means, 1.0 - alpha / 2.0),
        point_estimate: mean(series.iter().copied(), n),
        level,
        n_resamples,
        seed,
    })
}

pub fn compare_cis<T: Scalar>(a: &BootstrapCi<T>, b: &BootstrapCi<T>) -> Result<CiRelation, StatsError> {
    if a.level != b.level {
        return Err(StatsError::LevelMismatch(a.level, b.level));
    }
    Ok(if a.upper < b.lower || b.upper < a.lower {
        CiRelation::Disjoint
    } else {
        CiRelation::Overlapping
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ci(lower: f64, upper: f64) -> BootstrapCi<f64> {
        BootstrapCi {
            lower,
            upper,
            point_estimate: (lower + upper) / 2.0,
            level: 0.95,
            n_resamples: 10_000,
            seed: 0,
        }
    }

    #[test]
    fn nearest_rank_indices() {
        let v: Vec<u32> = (1..=10_000).collect();
        assert_eq!(nearest_rank(&v, 0.025), 250);
        assert_eq!(nearest_rank(&v, 0.975), 9750);
        assert_eq!(nearest_rank(&v, 0.0), 1);
        assert_eq!(nearest_rank(&v, 1.0), 10_000);
    }

    #[test]
    fn zero_variance() {
        let r = bootstrap_ci(&[1.0f64; 37], 0.95, 500, 3).unwrap();
        assert_eq!((r.lower, r.upper), (1.0, 1.0));
    }

    #[test]
    fn deterministic() {
        let s: Vec<f64> = (0..50).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let a = bootstrap_ci(&s, 0.95, 2_000, 99).unwrap();
        let b = bootstrap_ci(&s, 0.95, 2_000, 99).unwrap();
        assert_eq!(a.lower.to_bits(), b.lower.to_bits());
        assert_eq!(a.upper.to_bits(), b.upper.to_bits());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            bootstrap_ci::<f64>(&[], 0.95, 1000, 0),
            Err(StatsError::Empty)
        ));
        assert!(bootstrap_ci(&[1.0f64], 1.0, 1000, 0).is_err());
        assert!(bootstrap_ci(&[1.0f64], 0.95, 99, 0).is_err());
    }

    #[test]
    fn overlap() {
        assert_eq!(
            compare_cis(&ci(0.80, 0.93), &ci(0.55, 0.74)).unwrap(),
            CiRelation::Disjoint
        );
        assert_eq!(
            compare_cis(&ci(0.80, 0.93), &ci(0.75, 0.90)).unwrap(),
            CiRelation::Overlapping
        );
        assert_eq!(
            compare_cis(&ci(0.6, 0.7), &ci(0.6, 0.7)).unwrap(),
            CiRelation::Overlapping
        );
        let mut other = ci(0.1, 0.2);
        other.level = 0.9;
        assert!(compare_cis(&ci(0.1, 0.2), &other).is_err());
    }

    #[test]
    fn exact_rational_series() {
        use num_rational::Ratio;
        let s: Vec<Ratio<i64>> = (0..20).map(|i| Ratio::from_integer((i < 15) as i64)).collect();
        let r = bootstrap_ci(&s, 0.9, 500, 1).unwrap();
        assert_eq!(r.point_estimate, Ratio::new(3, 4));
        assert!(r.lower <= r.upper);
        // resample means are multiples of 1/20
        assert_eq!(20 % *r.lower.denom(), 0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn bounds_within_range(bits in proptest::collection::vec(proptest::bool::ANY, 1..80), seed in proptest::num::u64::ANY) {
            let s: Vec<f64> = bits.iter().map(|&b| b as u8 as f64).collect();
            let r = bootstrap_ci(&s, 0.95, 200, seed).unwrap();
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(lo <= r.lower && r.lower <= r.upper && r.upper <= hi);
        }
    }
}
