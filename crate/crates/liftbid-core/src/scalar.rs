//! Scalar abstraction for the numeric core.
//!
//! Estimators and losses are written against [`Real`] so they can run in
//! `f32` or `f64`; the crate root exposes `f64` aliases for the concrete
//! types used by the pipeline. The market simulator and money handling are
//! deliberately *not* generic: auction prices live in integer micros and the
//! simulator's calibration assumes `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the learning core.
///
/// A blanket implementation covers `f32` and `f64` (and any other type with
/// the same bounds); nothing here needs to be implemented by hand.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`, for constants and configuration values.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }

    /// Lossy conversion to `f64`, for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }

    /// Conversion from a sample count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("sample count must fit the scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + Sum<T>
        + Debug
        + Display
        + Send
        + Sync
        + serde::Serialize
        + serde::de::DeserializeOwned
        + 'static
{
}

/// Compensated (Neumaier) summation.
///
/// Keeps a running error term so that long, mixed-magnitude sums — e.g. the
/// population mean of millions of lift predictions — stay accurate enough for
/// tight reproducibility tolerances.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<R: Real> {
    sum: R,
    compensation: R,
}

impl<R: Real> Default for CompensatedSum<R> {
    fn default() -> Self {
        Self { sum: R::zero(), compensation: R::zero() }
    }
}

impl<R: Real> CompensatedSum<R> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: R) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> R {
        self.sum + self.compensation
    }
}

/// Sum an iterator with compensation.
pub fn compensated_sum<R: Real>(values: impl IntoIterator<Item = R>) -> R {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Compensated arithmetic mean; zero for an empty iterator.
pub fn compensated_mean<R: Real>(values: impl IntoIterator<Item = R>) -> R {
    let mut acc = CompensatedSum::new();
    let mut n = 0usize;
    for v in values {
        acc.add(v);
        n += 1;
    }
    if n == 0 {
        R::zero()
    } else {
        acc.value() / R::from_count(n)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<R: Real>(z: R) -> R {
    if z >= R::zero() {
        let e = (-z).exp();
        R::one() / (R::one() + e)
    } else {
        let e = z.exp();
        e / (R::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn blanket_impl_covers_both_widths() {
        fn mean_of<R: Real>(xs: &[R]) -> R {
            compensated_mean(xs.iter().copied())
        }
        assert_relative_eq!(mean_of(&[1.0f64, 2.0, 3.0]), 2.0);
        assert_relative_eq!(mean_of(&[1.0f32, 2.0, 3.0]), 2.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        // Naive f64 summation loses the 1.0 entirely against 1e16.
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(xs.iter().copied()), 1.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        assert_relative_eq!(sigmoid(0.0f64), 0.5);
        assert_relative_eq!(sigmoid(3.0f64) + sigmoid(-3.0f64), 1.0, epsilon = 1e-15);
        assert!(sigmoid(800.0f64) <= 1.0);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert!(sigmoid(-800.0f64) < 1e-300);
    }
}
