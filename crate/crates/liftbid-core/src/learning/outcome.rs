//! Per-exposure-bin outcome predictors and the lift/normalization layer on
//! top of them.

use serde::{Deserialize, Serialize};

use crate::domain::{exposure_bin, ExposureBin};
use crate::learning::learner::{fit_regressor, LearnerConfig, Regressor};
use crate::learning::propensity::PropensityModel;
use crate::learning::{LearnError, TrainMode, TrainingSet};
use crate::scalar::{CompensatedSum, Real};

/// One regressor per exposure bin, each predicting the expected campaign
/// visit count of a user held at that bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OutcomePredictor<R: Real> {
    pub mode: TrainMode,
    models: Vec<Regressor<R>>, // length 8, indexed by bin
}

impl<R: Real> OutcomePredictor<R> {
    pub fn new(mode: TrainMode, models: Vec<Regressor<R>>) -> Self {
        assert_eq!(models.len(), ExposureBin::COUNT);
        Self { mode, models }
    }

    /// Predicted expected visit count at `bin`, clamped to be non-negative
    /// (a visit count cannot be negative; raw regressor output can dip below
    /// zero near the boundary).
    pub fn predict_visits(&self, x: &[R; 4], bin: ExposureBin) -> R {
        self.models[bin.index()].predict(x).max(R::zero())
    }
}

/// Train the eight per-bin regressors under the requested mode.
///
/// Per-sample weights: 1 for [`TrainMode::Erm`]; `1/e_b(x)` with raw scores
/// for [`TrainMode::Ips`]; `1/min(e_b(x), ẽ_b)` for [`TrainMode::IpsClipped`]
/// (requires the model's clip thresholds to be present). Extreme weights are
/// counted and logged, never silently altered.
pub fn fit_outcome_models<R: Real>(
    set: &TrainingSet<R>,
    propensity: &PropensityModel<R>,
    mode: TrainMode,
    cfg: &LearnerConfig,
) -> Result<OutcomePredictor<R>, LearnError> {
    set.require_populated_bins(cfg.min_per_bin)?;
    if mode == TrainMode::IpsClipped && propensity.clip_thresholds.is_none() {
        return Err(LearnError::MissingClipThresholds);
    }

    let warn_at = R::from_f64_lossy(cfg.weight_warn_threshold);
    let mut extreme = 0usize;
    let mut models = Vec::with_capacity(ExposureBin::COUNT);
    for bin in ExposureBin::all() {
        let rows = set.bin_rows(bin);
        let x: Vec<[R; 4]> = rows.iter().map(|&i| set.x[i]).collect();
        let y: Vec<R> = rows.iter().map(|&i| set.y[i]).collect();
        let mut w = Vec::with_capacity(rows.len());
        match mode {
            TrainMode::Erm => w.resize(rows.len(), R::one()),
            TrainMode::Ips | TrainMode::IpsClipped => {
                for (pos, &i) in rows.iter().enumerate() {
                    let e = if mode == TrainMode::Ips {
                        propensity.propensity_unclipped(&set.x[i], bin)
                    } else {
                        propensity.propensity(&set.x[i], bin)
                    };
                    if e <= R::zero() {
                        return Err(LearnError::NonPositivePropensity {
                            index: pos,
                            value: e.to_f64_lossy(),
                        });
                    }
                    let weight = R::one() / e;
                    if weight > warn_at {
                        extreme += 1;
                    }
                    w.push(weight);
                }
            }
        }
        models.push(fit_regressor(cfg, &x, &y, &w));
    }
    if extreme > 0 {
        log::warn!(
            "{extreme} inverse-propensity weights exceeded {:.0e} during {mode} training",
            cfg.weight_warn_threshold
        );
    }
    Ok(OutcomePredictor::new(mode, models))
}

/// Predicted lift of the **next** impression for a user currently at
/// exposure count `c`, amortized per impression across the bin transition.
///
/// With `b = bin(c)`: the value is `(f^{b+1}(x) − f^b(x)) / gap(b, b+1)`
/// whether or not `c + 1` crosses into the next bin — within a wide bin the
/// forthcoming transition is amortized over the bin's full width. The open
/// last bin has no next state and reports zero.
pub fn predict_lift<R: Real>(models: &OutcomePredictor<R>, x: &[R; 4], c: u32) -> R {
    let b = exposure_bin(c);
    let Some(next) = b.next() else { return R::zero() };
    let gap = R::from_count(b.gap_to_next().expect("non-last bin has a gap") as usize);
    (models.predict_visits(x, next) - models.predict_visits(x, b)) / gap
}

/// Mean predicted lift over the training population × all eight exposure
/// states (the open last bin contributes its defined zero). Computed with
/// compensated summation so the downstream mean-one normalization holds to
/// tight tolerance.
pub fn tau_bar<R: Real>(models: &OutcomePredictor<R>, xs: &[[R; 4]]) -> R {
    assert!(!xs.is_empty(), "tau_bar needs a training population");
    let mut acc = CompensatedSum::new();
    for x in xs {
        for bin in ExposureBin::all() {
            acc.add(predict_lift(models, x, bin.lower()));
        }
    }
    acc.value() / R::from_count(xs.len() * ExposureBin::COUNT)
}

/// Normalize a lift prediction by the frozen population mean: `φ = τ̂ / τ̄`.
///
/// The result is signed — bidding floors it at zero, the normalizer must
/// reflect the signed mean. Errors when the normalizer is too close to zero
/// to divide by.
pub fn normalize_phi<R: Real>(tau_hat: R, tau_bar: R) -> Result<R, LearnError> {
    if tau_bar.abs().to_f64_lossy() < 1e-12 {
        return Err(LearnError::DegenerateNormalizer(tau_bar.to_f64_lossy()));
    }
    Ok(tau_hat / tau_bar)
}
