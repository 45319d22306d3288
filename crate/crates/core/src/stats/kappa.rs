//! Fleiss' kappa for a fixed number of raters per subject.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::scalar::Scalar;

/// Landis–Koch style interpretation bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgreementBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl AgreementBand {
    pub fn for_kappa(kappa: f64) -> Self {
        if kappa < 0.0 {
            Self::Poor
        } else if kappa <= 0.20 {
            Self::Slight
        } else if kappa <= 0.40 {
            Self::Fair
        } else if kappa <= 0.60 {
            Self::Moderate
        } else if kappa <= 0.80 {
            Self::Substantial
        } else {
            Self::AlmostPerfect
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Poor => "Poor agreement",
            Self::Slight => "Slight agreement",
            Self::Fair => "Fair agreement",
            Self::Moderate => "Moderate agreement",
            Self::Substantial => "Substantial agreement",
            Self::AlmostPerfect => "Almost perfect agreement",
        }
    }
}

impl fmt::Display for AgreementBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult<T> {
    pub kappa: T,
    /// Mean observed pairwise agreement.
    pub p_bar: T,
    /// Agreement expected by chance.
    pub pe_bar: T,
    pub interpretation: AgreementBand,
    /// Set when every vote fell in one category, so chance agreement is 1.
    pub degenerate: bool,
}

/// Fleiss' kappa over a subjects × categories count matrix.
///
/// Every row must sum to the same rater count `n ≥ 2`.
pub fn fleiss_kappa<T, R>(rows: &[R]) -> Result<KappaResult<T>, StatsError>
where
    T: Scalar,
    R: AsRef<[u32]>,
{
    let first = rows.first().ok_or(StatsError::Empty)?.as_ref();
    let k = first.len();
    let raters: u64 = first.iter().map(|&c| c as u64).sum();
    if raters < 2 {
        return Err(StatsError::TooFewRaters(raters));
    }
    let mut column_totals = vec![0u64; k];
    let mut agreement_sum = T::zero();
    let pair_count = T::from_count(raters * (raters - 1));
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        let sum: u64 = row.iter().map(|&c| c as u64).sum();
        if row.len() != k || sum != raters {
            return Err(StatsError::RaggedRow {
                row: i,
                expected: raters,
                found: sum,
            });
        }
        let mut agreeing = 0u64;
        for (j, &c) in row.iter().enumerate() {
            let c = c as u64;
            column_totals[j] += c;
            agreeing += c * c.saturating_sub(1);
        }
        agreement_sum = agreement_sum + T::from_count(agreeing) / pair_count;
    }
    let n_subjects = T::from_count(rows.len() as u64);
    let p_bar = agreement_sum / n_subjects;
    let all_votes = T::from_count(rows.len() as u64 * raters);
    let pe_bar = column_totals.iter().fold(T::zero(), |acc, &c| {
        let p = T::from_count(c) / all_votes;
        acc + p * p
    });

    let (kappa, degenerate) = if pe_bar == T::one() {
        // every vote in one category; p_bar is necessarily 1 as well
        (T::one(), true)
    } else {
        ((p_bar - pe_bar) / (T::one() - pe_bar), false)
    };
    Ok(KappaResult {
        kappa,
        p_bar,
        pe_bar,
        interpretation: AgreementBand::for_kappa(kappa.to_f64()),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    #[test]
    fn two_question_fixture_exact() {
        // row 1 {A:3}: 3·2/6 = 1; row 2 {A:1,B:2}: 2·1/6 = 1/3 → P̄ = 2/3
        // p_A = 4/6, p_B = 2/6 → P̄e = 16/36 + 4/36 = 5/9
        // κ = (2/3 − 5/9)/(4/9) = 1/4
        let rows = [[3u32, 0, 0, 0], [1, 2, 0, 0]];
        let r = fleiss_kappa::<Q, _>(&rows).unwrap();
        assert_eq!(r.p_bar, Q::new(2, 3));
        assert_eq!(r.pe_bar, Q::new(5, 9));
        assert_eq!(r.kappa, Q::new(1, 4));
        assert_eq!(r.interpretation, AgreementBand::Fair);
        let f = fleiss_kappa::<f64, _>(&rows).unwrap();
        assert!((f.kappa - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unanimous_is_one() {
        let rows = [[3u32, 0, 0, 0], [0, 3, 0, 0], [0, 0, 0, 3]];
        let r = fleiss_kappa::<Q, _>(&rows).unwrap();
        assert_eq!(r.kappa, Q::from_integer(1));
        assert!(!r.degenerate);
    }

    #[test]
    fn single_category_is_degenerate() {
        let rows = [[0u32, 3, 0, 0], [0, 3, 0, 0]];
        let r = fleiss_kappa::<f64, _>(&rows).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert!(r.degenerate);
    }

    #[test]
    fn ragged_and_empty() {
        let rows: [[u32; 4]; 0] = [];
        assert!(matches!(fleiss_kappa::<f64, _>(&rows), Err(StatsError::Empty)));
        let rows = [[3u32, 0, 0, 0], [1, 1, 0, 0]];
        assert!(matches!(
            fleiss_kappa::<f64, _>(&rows),
            Err(StatsError::RaggedRow { row: 1, .. })
        ));
        let rows = [[1u32, 0, 0, 0]];
        assert!(matches!(
            fleiss_kappa::<f64, _>(&rows),
            Err(StatsError::TooFewRaters(1))
        ));
    }

    #[test]
    fn bands() {
        assert_eq!(AgreementBand::for_kappa(0.7160).label(), "Substantial agreement");
        assert_eq!(AgreementBand::for_kappa(0.2811).label(), "Fair agreement");
        assert_eq!(AgreementBand::for_kappa(0.4275).label(), "Moderate agreement");
        assert_eq!(AgreementBand::for_kappa(0.5572).label(), "Moderate agreement");
        assert_eq!(AgreementBand::for_kappa(0.1), AgreementBand::Slight);
        assert_eq!(AgreementBand::for_kappa(0.95), AgreementBand::AlmostPerfect);
        assert_eq!(AgreementBand::for_kappa(-0.3), AgreementBand::Poor);
    }

    proptest::proptest! {
        #[test]
        fn relabeling_invariant(rows in proptest::collection::vec(proptest::array::uniform3(0usize..4), 1..40), rot in 0usize..4) {
            let to_row = |v: &[usize; 3], shift: usize| {
                let mut r = [0u32; 4];
                for &x in v { r[(x + shift) % 4] += 1; }
                r
            };
            let a: Vec<_> = rows.iter().map(|v| to_row(v, 0)).collect();
            let b: Vec<_> = rows.iter().map(|v| to_row(v, rot)).collect();
            let ka = fleiss_kappa::<Q, _>(&a).unwrap();
            let kb = fleiss_kappa::<Q, _>(&b).unwrap();
            proptest::prop_assert_eq!(ka.kappa, kb.kappa);
        }
    }
}
