//! The serialized model bundle: everything the bidding engine needs at run
//! time, trained in one pass from a logging campaign's artifacts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bidding::PctrModel;
use crate::domain::ExposureBin;
use crate::learning::learner::{fit_regressor, LearnerConfig, Regressor};
use crate::learning::outcome::{fit_outcome_models, tau_bar, OutcomePredictor};
use crate::learning::propensity::{clip_propensity, fit_propensity, ClipDiagnostics, PropensityModel};
use crate::learning::{LearnError, TrainMode, TrainingSet};
use crate::scalar::{compensated_mean, Real};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Pooled conversion-rate model for the performance bidder: expected campaign
/// visits given ad exposure, trained on all bins at once, with the training
/// mean frozen for normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PooledPcvr<R: Real> {
    pub model: Regressor<R>,
    /// Mean raw prediction over the training population.
    pub mean: R,
}

impl<R: Real> PooledPcvr<R> {
    /// Raw prediction, clamped non-negative.
    pub fn predict_raw(&self, x: &[R; 4]) -> R {
        self.model.predict(x).max(R::zero())
    }

    /// Prediction divided by the frozen training mean, so the population
    /// mean of the normalized value is one.
    pub fn predict_normalized(&self, x: &[R; 4]) -> Result<R, LearnError> {
        if self.mean.abs().to_f64_lossy() < 1e-12 {
            return Err(LearnError::DegenerateNormalizer(self.mean.to_f64_lossy()));
        }
        Ok(self.predict_raw(x) / self.mean)
    }
}

/// Training provenance and diagnostics embedded in every bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    /// Total training sample count (one row per logged user).
    pub n: usize,
    /// Samples per exposure bin.
    pub n_per_bin: [usize; ExposureBin::COUNT],
    pub clip: ClipDiagnostics,
}

/// Everything a bidding arm loads: the propensity model (with clip
/// thresholds and diagnostics), the per-bin outcome predictors, the frozen
/// lift normalizer, the pooled conversion-rate model, and the shared
/// per-slot click-through-rate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelBundle<R: Real> {
    pub schema_version: u32,
    pub mode: TrainMode,
    pub propensity: PropensityModel<R>,
    pub outcome: OutcomePredictor<R>,
    pub tau_bar: R,
    pub pcvr: PooledPcvr<R>,
    pub pctr: PctrModel,
    pub meta: TrainMeta,
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle schema version {got} is not supported (expected {expected})")]
    UnsupportedVersion { got: u32, expected: u32 },
    #[error("bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl<R: Real> ModelBundle<R> {
    /// Pretty JSON with a trailing newline; field order is fixed by the
    /// struct, so serialization is byte-stable.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let bundle: ModelBundle<R> = serde_json::from_str(text)?;
        if bundle.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(BundleError::UnsupportedVersion {
                got: bundle.schema_version,
                expected: BUNDLE_SCHEMA_VERSION,
            });
        }
        Ok(bundle)
    }
}

/// Fits that every training mode shares: the clipped propensity model (its
/// diagnostics matter in all modes) and the pooled conversion-rate model.
/// Fit once, reuse across the per-mode bundles.
#[derive(Debug, Clone)]
pub struct SharedFits<R: Real> {
    pub propensity: PropensityModel<R>,
    pub clip: ClipDiagnostics,
    pub pcvr: PooledPcvr<R>,
}

/// Fit the mode-independent pieces of a bundle.
pub fn fit_shared<R: Real>(
    set: &TrainingSet<R>,
    cfg: &LearnerConfig,
) -> Result<SharedFits<R>, LearnError> {
    let unclipped = fit_propensity(set, cfg)?;
    let (propensity, clip) = clip_propensity(&unclipped, &set.x, &set.bin, cfg.clip_percentile);
    let ones = vec![R::one(); set.len()];
    let pooled = fit_regressor(cfg, &set.x, &set.y, &ones);
    let pooled_mean =
        compensated_mean(set.x.iter().map(|x| pooled.predict(x).max(R::zero())));
    Ok(SharedFits { propensity, clip, pcvr: PooledPcvr { model: pooled, mean: pooled_mean } })
}

/// Train one mode's bundle on top of already-fitted shared pieces. The
/// outcome models apply weights according to `mode`; `seed` is recorded in
/// the metadata — every fit in the pipeline is deterministic given its
/// inputs.
pub fn train_bundle_with<R: Real>(
    set: &TrainingSet<R>,
    pctr: PctrModel,
    mode: TrainMode,
    cfg: &LearnerConfig,
    seed: u64,
    shared: &SharedFits<R>,
) -> Result<ModelBundle<R>, LearnError> {
    let outcome = fit_outcome_models(set, &shared.propensity, mode, cfg)?;
    let tau = tau_bar(&outcome, &set.x);
    Ok(ModelBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        mode,
        propensity: shared.propensity.clone(),
        outcome,
        tau_bar: tau,
        pcvr: shared.pcvr.clone(),
        pctr,
        meta: TrainMeta { seed, n: set.len(), n_per_bin: set.bin_counts(), clip: shared.clip },
    })
}

/// Train a complete bundle from the user-level training table.
pub fn train_bundle<R: Real>(
    set: &TrainingSet<R>,
    pctr: PctrModel,
    mode: TrainMode,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<ModelBundle<R>, LearnError> {
    let shared = fit_shared(set, cfg)?;
    train_bundle_with(set, pctr, mode, cfg, seed, &shared)
}
