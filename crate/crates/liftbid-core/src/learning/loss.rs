//! Empirical losses over one exposure bin's data: the plain empirical risk
//! and its inverse-propensity-weighted counterpart.

use crate::learning::LearnError;
use crate::scalar::{CompensatedSum, Real};

/// Squared error.
#[inline]
fn sq_err<R: Real>(y: R, pred: R) -> R {
    let d = y - pred;
    d * d
}

/// Mean squared error over one bin: `(1/n_b) Σ ℓ(y_i, f(x_i))`.
///
/// `predictions[i]` is the bin predictor evaluated at the i-th sample.
/// Panics on empty or mismatched inputs (caller precondition).
pub fn erm_loss<R: Real>(predictions: &[R], targets: &[R]) -> R {
    assert!(!targets.is_empty(), "erm_loss requires a nonempty bin");
    assert_eq!(predictions.len(), targets.len(), "predictions and targets must align");
    let mut acc = CompensatedSum::new();
    for (&p, &y) in predictions.iter().zip(targets) {
        acc.add(sq_err(y, p));
    }
    acc.value() / R::from_count(targets.len())
}

/// Inverse-propensity-weighted squared loss over one bin:
/// `(1/n) Σ ℓ(y_i, f(x_i)) / e_i`.
///
/// `total_n` is the sample count across **all** bins, not just this one —
/// the weighted sum is normalized by the full dataset size so that summing
/// the per-bin values estimates the population risk. The special case
/// `e_i ≡ n_b / n` collapses to [`erm_loss`] exactly.
pub fn ips_loss<R: Real>(
    predictions: &[R],
    targets: &[R],
    propensities: &[R],
    total_n: usize,
) -> Result<R, LearnError> {
    assert!(!targets.is_empty(), "ips_loss requires a nonempty bin");
    assert_eq!(predictions.len(), targets.len(), "predictions and targets must align");
    assert_eq!(propensities.len(), targets.len(), "propensities and targets must align");
    assert!(total_n > 0, "total sample count must be positive");
    let mut acc = CompensatedSum::new();
    for (i, ((&p, &y), &e)) in predictions.iter().zip(targets).zip(propensities).enumerate() {
        if e <= R::zero() {
            return Err(LearnError::NonPositivePropensity { index: i, value: e.to_f64_lossy() });
        }
        acc.add(sq_err(y, p) / e);
    }
    Ok(acc.value() / R::from_count(total_n))
}
