//! Scalar abstraction shared by the signalprint geometry and the
//! classification layer.
//!
//! Everything that only needs field arithmetic and ordering is written
//! against [`Scalar`], so the same code runs on `f32`, `f64` and the exact
//! rational type [`Exact`]. Square roots are only needed to report a distance
//! in dBm; comparisons against thresholds are done on squared values.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational scalar, used where threshold boundaries must be decided
/// without rounding (γ-similarity at the bound, distance exactly at a
/// threshold, power-shift invariance).
pub type Exact = Ratio<i64>;

pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }

    /// Lossy conversion used when importing simulator values.
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

impl Scalar for Exact {
    /// Rounds to the nearest 1/10000 before converting; simulator values are
    /// quantized far more coarsely than that.
    fn from_f64_lossy(v: f64) -> Self {
        let scaled = (v * 10_000.0).round() as i64;
        Ratio::new(scaled, 10_000)
    }
}

/// `a <= b` for the partial order, treating incomparable values as false.
pub(crate) fn le<S: Scalar>(a: S, b: S) -> bool {
    matches!(a.partial_cmp(&b), Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_import_is_exact_for_quantized_values() {
        assert_eq!(Exact::from_f64_lossy(-57.0), Ratio::from_integer(-57));
        assert_eq!(Exact::from_f64_lossy(1.25), Ratio::new(5, 4));
    }

    #[test]
    fn counts_convert() {
        assert_eq!(f64::from_count(14), 14.0);
        assert_eq!(Exact::from_count(3), Ratio::from_integer(3));
    }
}
