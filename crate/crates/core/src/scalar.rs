//! Numeric abstraction shared by every real-valued quantity in the crate
//! (Kendall tau, fusion scores, gains, normalized matrices).

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, Num};

/// A value that can be built from integer counts and compared.
///
/// Implemented for `f32`, `f64` and exact `Ratio<i64>`.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync {
    fn from_count(count: u64) -> Self;

    fn to_f64(self) -> f64;
}

/// Scalars with transcendental functions (logarithms for nDCG discounts).
pub trait RealScalar: Scalar + Float {}

impl Scalar for f64 {
    fn from_count(count: u64) -> Self {
        count as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(count: u64) -> Self {
        count as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(count: u64) -> Self {
        Ratio::from_integer(i64::try_from(count).expect("count exceeds i64"))
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl RealScalar for f64 {}
impl RealScalar for f32 {}
