//! Scalar abstractions.
//!
//! [`Scalar`] is the real-number carrier for tensors and networks. [`Weight`]
//! is the looser bound used for probability tables, so transition matrices can
//! be built over exact rationals as well as floats.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Floating-point element type for tensors, networks and losses.
pub trait Scalar:
    Float
    + FromPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Short type name used in checkpoints.
    const NAME: &'static str;

    /// Lower clamp applied to probabilities inside logarithms.
    fn log_clamp() -> Self;

    /// Tolerance for "sums to one" checks on probability rows.
    fn sum_tolerance() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn log_clamp() -> Self {
        1e-12
    }

    fn sum_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn log_clamp() -> Self {
        1e-12
    }

    fn sum_tolerance() -> Self {
        1e-5
    }
}

/// Entry type of a probability table.
pub trait Weight: Num + Clone + PartialOrd + ToPrimitive + FromPrimitive + Debug {
    /// Allowed absolute deviation of a row sum from one.
    fn row_tolerance() -> Self;

    fn abs_diff(&self, other: &Self) -> Self {
        if self > other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }
}

impl Weight for f64 {
    fn row_tolerance() -> Self {
        1e-9
    }
}

impl Weight for f32 {
    fn row_tolerance() -> Self {
        1e-5
    }
}

impl Weight for Ratio<i64> {
    fn row_tolerance() -> Self {
        Ratio::from_integer(0)
    }
}
