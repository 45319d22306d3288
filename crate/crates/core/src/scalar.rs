//! Numeric abstractions shared by the statistics and consensus code.
//!
//! Counting statistics (agreement rates, Fleiss' kappa, bootstrap means) only
//! need field arithmetic, so they are written against [`Scalar`] and run over
//! `f32`, `f64` or exact rationals. Anything that needs transcendental
//! functions (the chi-square tail) requires [`Real`].

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num};

/// A number type usable for counting statistics.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lift a non-negative count into the scalar type.
    fn from_count(n: u64) -> Self;

    /// Lossy conversion used for reporting and band lookups.
    fn to_f64(self) -> f64;
}

/// Floating-point scalars.
pub trait Real: Scalar + Float + FromPrimitive {
    /// Lift an `f64` literal. Panics only if the type cannot represent finite
    /// `f64` values at all, which no supported type does.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_count(n: u64) -> Self {
        n as f64
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_count(n: u64) -> Self {
        n as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {}
impl Real for f32 {}

macro_rules! impl_ratio_scalar {
    ($($int:ty),*) => {$(
        impl Scalar for Ratio<$int> {
            #[inline]
            fn from_count(n: u64) -> Self {
                Ratio::from_integer(<$int>::try_from(n).expect("count fits in rational numerator"))
            }
            #[inline]
            fn to_f64(self) -> f64 {
                *self.numer() as f64 / *self.denom() as f64
            }
        }
    )*};
}

impl_ratio_scalar!(i64, i128);
