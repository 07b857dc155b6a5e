//! Counterfactual training pipeline: losses, weighted learners, the exposure
//! propensity model with percentile clipping, per-bin outcome predictors,
//! lift prediction, and the serialized model bundle.
//!
//! Everything here is generic over [`crate::scalar::Real`] (`f32` or `f64`);
//! the crate root exports `f64` aliases.

mod bundle;
mod learner;
mod linalg;
mod logistic;
mod loss;
mod outcome;
mod propensity;

pub use bundle::{
    fit_shared, train_bundle, train_bundle_with, BundleError, ModelBundle, PooledPcvr, SharedFits,
    TrainMeta, BUNDLE_SCHEMA_VERSION,
};
pub use learner::{fit_regressor, LearnerConfig, LearnerKind, Regressor, RidgeModel, StumpEnsemble};
pub use logistic::MultinomialLogistic;
pub use loss::{erm_loss, ips_loss};
pub use outcome::{fit_outcome_models, normalize_phi, predict_lift, tau_bar, OutcomePredictor};
pub use propensity::{
    clip_propensity, fit_propensity, nearest_rank_percentile, ClipDiagnostics, PropensityModel,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ExposureBin, ImpressionLog, UserId, VisitLabel};
use crate::scalar::Real;

/// How the outcome predictors were trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Plain empirical risk minimization on the logged data.
    Erm,
    /// Inverse-propensity-weighted risk, raw scores.
    Ips,
    /// Inverse-propensity-weighted risk, scores clipped at the top percentile.
    IpsClipped,
}

impl TrainMode {
    pub const ALL: [TrainMode; 3] = [TrainMode::Erm, TrainMode::Ips, TrainMode::IpsClipped];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Erm => "erm",
            TrainMode::Ips => "ips",
            TrainMode::IpsClipped => "ips-clipped",
        }
    }

    pub fn from_name(name: &str) -> Option<TrainMode> {
        TrainMode::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    /// A bin has too few training samples — the logging campaign was too
    /// small (or too short) to cover every exposure state.
    #[error("exposure bin {bin} has {got} training samples, need at least {need}")]
    UnderpopulatedBin { bin: usize, got: usize, need: usize },
    /// A propensity score ≤ 0 reached an inverse-propensity weight — the
    /// propensity model is broken.
    #[error("non-positive propensity score {value:e} at sample {index}")]
    NonPositivePropensity { index: usize, value: f64 },
    /// The mean-lift normalizer is too close to zero to divide by.
    #[error("lift normalizer {0:e} is within 1e-12 of zero")]
    DegenerateNormalizer(f64),
    /// Clipped-mode training was requested on a propensity model that never
    /// had its clip thresholds computed.
    #[error("clipped propensity weights requested but no clip thresholds are set")]
    MissingClipThresholds,
}

/// User-level training table: one row per logged user with the features,
/// final exposure bin, and observed campaign visit count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<R: Real> {
    pub x: Vec<[R; 4]>,
    pub bin: Vec<ExposureBin>,
    pub y: Vec<R>,
}

impl<R: Real> TrainingSet<R> {
    pub fn new() -> Self {
        Self { x: Vec::new(), bin: Vec::new(), y: Vec::new() }
    }

    pub fn push(&mut self, x: [R; 4], bin: ExposureBin, y: R) {
        self.x.push(x);
        self.bin.push(bin);
        self.y.push(y);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn bin_counts(&self) -> [usize; ExposureBin::COUNT] {
        let mut counts = [0usize; ExposureBin::COUNT];
        for b in &self.bin {
            counts[b.index()] += 1;
        }
        counts
    }

    /// Indices of rows in a given bin, in row order.
    pub fn bin_rows(&self, bin: ExposureBin) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bin[i] == bin).collect()
    }

    /// Fail unless every one of the 8 bins has at least `min_per_bin` rows.
    pub fn require_populated_bins(&self, min_per_bin: usize) -> Result<(), LearnError> {
        let counts = self.bin_counts();
        for (bin, &got) in counts.iter().enumerate() {
            if got < min_per_bin {
                return Err(LearnError::UnderpopulatedBin { bin, got, need: min_per_bin });
            }
        }
        Ok(())
    }

    /// Join impression logs with visit labels into the user-level table.
    ///
    /// Attribution is user-level: each user contributes exactly one row,
    /// keyed by their final exposure bin and campaign visit count. Features
    /// are taken from the user's first logged request (they are static
    /// snapshots, identical on every row). Labeled users with no logged
    /// request at all are skipped with a warning — they carry no features.
    pub fn from_logs(impressions: &[ImpressionLog], labels: &[VisitLabel]) -> Self {
        use std::collections::HashMap;
        let mut features: HashMap<UserId, [R; 4]> = HashMap::new();
        for rec in impressions {
            features
                .entry(rec.user_id)
                .or_insert_with(|| to_scalar_features::<R>(rec.features.to_array()));
        }
        let mut set = TrainingSet::new();
        let mut skipped = 0usize;
        for label in labels {
            match features.get(&label.user_id) {
                Some(&x) => set.push(
                    x,
                    crate::domain::exposure_bin(label.s_final),
                    R::from_count(label.y_obs as usize),
                ),
                None => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("{skipped} labeled users had no logged requests and were dropped");
        }
        set
    }
}

impl<R: Real> Default for TrainingSet<R> {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn to_scalar_features<R: Real>(x: [f64; 4]) -> [R; 4] {
    x.map(R::from_f64_lossy)
}
