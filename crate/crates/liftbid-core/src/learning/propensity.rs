//! Exposure propensity model: which exposure bin a user lands in under the
//! logging policy, as a function of their features — plus the top-percentile
//! score clipping used by the debiased trainer.

use serde::{Deserialize, Serialize};

use crate::domain::ExposureBin;
use crate::learning::logistic::MultinomialLogistic;
use crate::learning::{LearnError, LearnerConfig, TrainingSet};
use crate::scalar::Real;

/// Calibrated class probabilities over the eight exposure bins, optionally
/// with per-bin caps on emitted scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PropensityModel<R: Real> {
    model: MultinomialLogistic<R>,
    /// Per-bin score caps (`None` until [`clip_propensity`] computes them).
    pub clip_thresholds: Option<[R; ExposureBin::COUNT]>,
}

impl<R: Real> PropensityModel<R> {
    /// Raw class probabilities (each in (0,1], summing to 1).
    pub fn predict_unclipped(&self, x: &[R; 4]) -> [R; ExposureBin::COUNT] {
        self.model.predict_proba(x)
    }

    /// Class probabilities with the per-bin caps applied when present.
    pub fn predict(&self, x: &[R; 4]) -> [R; ExposureBin::COUNT] {
        let mut p = self.predict_unclipped(x);
        if let Some(caps) = &self.clip_thresholds {
            for (v, &cap) in p.iter_mut().zip(caps) {
                if *v > cap {
                    *v = cap;
                }
            }
        }
        p
    }

    /// Single-bin score, capped when thresholds are present.
    pub fn propensity(&self, x: &[R; 4], bin: ExposureBin) -> R {
        self.predict(x)[bin.index()]
    }

    /// Single-bin score, never capped.
    pub fn propensity_unclipped(&self, x: &[R; 4], bin: ExposureBin) -> R {
        self.predict_unclipped(x)[bin.index()]
    }
}

/// Fit the multinomial propensity model on the user-level training table.
///
/// Every one of the 8 bins must appear at least `cfg.min_per_bin` times,
/// otherwise the logging campaign was too small and
/// [`LearnError::UnderpopulatedBin`] names the first offender. The fit is a
/// convex Newton optimization and is bit-deterministic for identical inputs.
pub fn fit_propensity<R: Real>(
    set: &TrainingSet<R>,
    cfg: &LearnerConfig,
) -> Result<PropensityModel<R>, LearnError> {
    set.require_populated_bins(cfg.min_per_bin)?;
    let model =
        MultinomialLogistic::fit(&set.x, &set.bin, cfg.propensity_l2, cfg.propensity_iters);
    Ok(PropensityModel { model, clip_thresholds: None })
}

/// Nearest-rank percentile: the value at rank `⌈p/100 · n⌉` (1-based) of the
/// sorted sample. Exact, reproducible, no interpolation.
pub fn nearest_rank_percentile<R: Real>(values: &[R], percentile: f64) -> R {
    assert!(!values.is_empty(), "percentile of an empty sample");
    assert!((0.0 < percentile && percentile <= 100.0), "percentile must be in (0, 100]");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let n = sorted.len();
    // `percentile·n/100` in floats can land a hair above an exact integer
    // rank (e.g. 99.9% of 1000 → 999.0000000000001); snap before ceiling so
    // the nearest-rank index matches exact arithmetic.
    let exact = percentile * n as f64 / 100.0;
    let rank = if (exact - exact.round()).abs() < 1e-9 { exact.round() } else { exact.ceil() } as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Diagnostics of what clipping did to the training scores, kept alongside
/// the model so the effect of the cap is visible in every bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipDiagnostics {
    pub percentile: f64,
    /// Per-bin cap ẽ_b.
    pub thresholds: [f64; ExposureBin::COUNT],
    /// Training scores capped, per bin.
    pub capped_counts: [usize; ExposureBin::COUNT],
    /// Largest inverse-propensity weight 1/e over own-bin training scores,
    /// before and after capping. Capping the top of the score distribution
    /// leaves small scores — hence the largest weights — untouched.
    pub max_weight_preclip: f64,
    pub max_weight_postclip: f64,
}

/// Cap each bin's emitted scores at the nearest-rank `percentile` of that
/// bin's scores over the training set: `e ← min(e, ẽ_b)`.
///
/// Returns the capped model plus diagnostics. When all training scores in a
/// bin are equal, the cap equals that value and clipping is the identity.
pub fn clip_propensity<R: Real>(
    model: &PropensityModel<R>,
    training_x: &[[R; 4]],
    training_bins: &[ExposureBin],
    percentile: f64,
) -> (PropensityModel<R>, ClipDiagnostics) {
    assert!(!training_x.is_empty(), "clipping requires training scores");
    assert_eq!(training_x.len(), training_bins.len());

    // Score every training row once.
    let scores: Vec<[R; ExposureBin::COUNT]> =
        training_x.iter().map(|x| model.predict_unclipped(x)).collect();

    let mut caps = [R::zero(); ExposureBin::COUNT];
    let mut capped_counts = [0usize; ExposureBin::COUNT];
    for bin in ExposureBin::all() {
        let b = bin.index();
        let column: Vec<R> = scores.iter().map(|s| s[b]).collect();
        let cap = nearest_rank_percentile(&column, percentile);
        caps[b] = cap;
        capped_counts[b] = column.iter().filter(|&&v| v > cap).count();
    }

    // Weight diagnostics use each row's own-bin score (the weight the
    // trainer would assign that sample).
    let mut max_w_pre = 0.0f64;
    let mut max_w_post = 0.0f64;
    for (s, bin) in scores.iter().zip(training_bins) {
        let e = s[bin.index()];
        let e_clip = if e > caps[bin.index()] { caps[bin.index()] } else { e };
        let w_pre = (R::one() / e).to_f64_lossy();
        let w_post = (R::one() / e_clip).to_f64_lossy();
        max_w_pre = max_w_pre.max(w_pre);
        max_w_post = max_w_post.max(w_post);
    }

    let clipped = PropensityModel { model: model.model.clone(), clip_thresholds: Some(caps) };
    let diagnostics = ClipDiagnostics {
        percentile,
        thresholds: caps.map(|c| c.to_f64_lossy()),
        capped_counts,
        max_weight_preclip: max_w_pre,
        max_weight_postclip: max_w_post,
    };
    (clipped, diagnostics)
}
