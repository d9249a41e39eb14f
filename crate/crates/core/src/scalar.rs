//! Scalar abstraction shared by the agreement and metric code.
//!
//! Every statistic that is a ratio of counts is computed through [`Scalar`],
//! so the same code path yields exact [`Rational`] values (used for report
//! rounding and tie detection) or `f32`/`f64` values.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Exact rational number used for agreement fractions and exact metrics.
pub type Rational = Ratio<i128>;

/// Numeric type the counting statistics are generic over.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    /// Converts a non-negative count.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// `num / den` for counts; callers guarantee `den > 0`.
    fn ratio(num: u64, den: u64) -> Self {
        debug_assert!(den > 0);
        Self::from_count(num) / Self::from_count(den)
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {}

/// Converts a decimal configuration value (e.g. `0.85`) into the simplest
/// rational that represents it.
pub fn fraction_from_f64(value: f64) -> Option<Rational> {
    if !value.is_finite() {
        return None;
    }
    Rational::approximate_float(value)
}

/// Rounds half away from zero for non-negative values (half-up).
pub fn round_half_up(value: Rational) -> i128 {
    (value + Rational::new(1, 2)).floor().to_integer()
}

/// Rounds `value` to `decimals` places, half-up, returning the rounded rational.
pub fn round_half_up_to(value: Rational, decimals: u32) -> Rational {
    let scale = 10i128.pow(decimals);
    Rational::new(round_half_up(value * scale), scale)
}

/// Integer percent, half-up, as printed in the agreement tables.
pub fn percent_half_up(value: Rational) -> i128 {
    round_half_up(value * Rational::from_integer(100))
}

/// Mean of a non-empty sequence of scalars; `None` when empty.
pub fn mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0u64;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / T::from_count(n))
}

pub(crate) fn is_zero<T: Scalar>(v: T) -> bool {
    v.is_zero()
}
