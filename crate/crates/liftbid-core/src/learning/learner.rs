//! Weighted regression learners behind the per-bin outcome predictors:
//! additive boosted depth-1 stumps (the default) and a closed-form weighted
//! ridge fallback. Both honor per-sample weights, which is all the
//! counterfactual pipeline asks of a learner.

use serde::{Deserialize, Serialize};

use crate::learning::linalg::cholesky_solve_in_place;
use crate::scalar::Real;

/// Which learner the pipeline fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Stumps,
    Ridge,
}

/// Hyperparameters shared by the trainable pieces of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub learner: LearnerKind,
    /// Boosting rounds per stump ensemble.
    pub rounds: usize,
    /// Boosting shrinkage (learning rate).
    pub shrinkage: f64,
    /// Ridge penalty for the fallback learner.
    pub ridge_lambda: f64,
    /// Minimum training samples per exposure bin.
    pub min_per_bin: usize,
    /// Newton iteration cap for the propensity fit.
    pub propensity_iters: usize,
    /// L2 strength (per sample) for the propensity fit.
    pub propensity_l2: f64,
    /// Upper percentile at which propensity scores are capped.
    pub clip_percentile: f64,
    /// Inverse-propensity weights above this trigger a logged warning.
    pub weight_warn_threshold: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learner: LearnerKind::Stumps,
            rounds: 200,
            shrinkage: 0.1,
            ridge_lambda: 1e-6,
            min_per_bin: 30,
            propensity_iters: 40,
            propensity_l2: 1e-4,
            clip_percentile: 99.9,
            weight_warn_threshold: 1e4,
        }
    }
}

/// Depth-1 split: `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Stump<R: Real> {
    pub feature: usize,
    pub threshold: R,
    /// Leaf contributions with shrinkage already applied.
    pub left: R,
    pub right: R,
}

/// Additive ensemble of depth-1 stumps over a constant base score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StumpEnsemble<R: Real> {
    pub base: R,
    pub stumps: Vec<Stump<R>>,
}

impl<R: Real> StumpEnsemble<R> {
    pub fn predict(&self, x: &[R; 4]) -> R {
        let mut score = self.base;
        for s in &self.stumps {
            score += if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        score
    }
}

/// Weighted ridge regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RidgeModel<R: Real> {
    means: [R; 4],
    sds: [R; 4],
    /// `[intercept, 4 feature coefficients]` on standardized inputs.
    coef: [R; 5],
}

impl<R: Real> RidgeModel<R> {
    pub fn predict(&self, x: &[R; 4]) -> R {
        let mut score = self.coef[0];
        for (j, &xj) in x.iter().enumerate() {
            score += self.coef[j + 1] * (xj - self.means[j]) / self.sds[j];
        }
        score
    }
}

/// A fitted per-bin regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
pub enum Regressor<R: Real> {
    Stumps(StumpEnsemble<R>),
    Ridge(RidgeModel<R>),
}

impl<R: Real> Regressor<R> {
    pub fn predict(&self, x: &[R; 4]) -> R {
        match self {
            Regressor::Stumps(m) => m.predict(x),
            Regressor::Ridge(m) => m.predict(x),
        }
    }
}

/// Fit the configured learner to `(x, y)` with per-sample weights `w`.
///
/// Weights must be strictly positive. The fit is deterministic: ties between
/// candidate splits break toward the lower feature index, then the lower
/// threshold.
pub fn fit_regressor<R: Real>(
    cfg: &LearnerConfig,
    x: &[[R; 4]],
    y: &[R],
    w: &[R],
) -> Regressor<R> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    assert!(!x.is_empty(), "regressor fit requires data");
    debug_assert!(w.iter().all(|&wi| wi > R::zero()), "weights must be positive");
    match cfg.learner {
        LearnerKind::Stumps => Regressor::Stumps(fit_stumps(cfg, x, y, w)),
        LearnerKind::Ridge => Regressor::Ridge(fit_ridge(cfg, x, y, w)),
    }
}

fn weighted_mean<R: Real>(y: &[R], w: &[R]) -> R {
    let mut num = R::zero();
    let mut den = R::zero();
    for (&yi, &wi) in y.iter().zip(w) {
        num += wi * yi;
        den += wi;
    }
    num / den
}

fn fit_stumps<R: Real>(cfg: &LearnerConfig, x: &[[R; 4]], y: &[R], w: &[R]) -> StumpEnsemble<R> {
    let n = x.len();
    let shrink = R::from_f64_lossy(cfg.shrinkage);
    let base = weighted_mean(y, w);
    let mut residual: Vec<R> = y.iter().map(|&yi| yi - base).collect();

    // Presort sample indices by each feature once; reused every round.
    let order: Vec<Vec<u32>> = (0..4)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                x[a as usize][f]
                    .partial_cmp(&x[b as usize][f])
                    .expect("finite feature values")
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let total_w: R = w.iter().copied().sum();
    let min_gain = R::from_f64_lossy(1e-12);
    let mut stumps = Vec::with_capacity(cfg.rounds);

    for _ in 0..cfg.rounds {
        let mut total_s = R::zero();
        for (i, &r) in residual.iter().enumerate() {
            total_s += w[i] * r;
        }
        let base_score = total_s * total_s / total_w;

        // Best split across features and positions; strict improvement only.
        let mut best: Option<(R, usize, R, R, R)> = None; // gain, feature, threshold, mean_l, mean_r
        for (f, idx) in order.iter().enumerate() {
            let mut w_l = R::zero();
            let mut s_l = R::zero();
            for pos in 0..n - 1 {
                let i = idx[pos] as usize;
                w_l += w[i];
                s_l += w[i] * residual[i];
                let here = x[i][f];
                let next = x[idx[pos + 1] as usize][f];
                if here == next {
                    continue; // can't split between equal values
                }
                let w_r = total_w - w_l;
                let s_r = total_s - s_l;
                let gain = s_l * s_l / w_l + s_r * s_r / w_r - base_score;
                if gain > best.as_ref().map_or(min_gain, |b| b.0) {
                    let two = R::one() + R::one();
                    best = Some((gain, f, (here + next) / two, s_l / w_l, s_r / w_r));
                }
            }
        }

        let Some((_, feature, threshold, mean_l, mean_r)) = best else {
            break; // no split improves; remaining rounds are no-ops
        };
        let stump = Stump {
            feature,
            threshold,
            left: shrink * mean_l,
            right: shrink * mean_r,
        };
        for (i, r) in residual.iter_mut().enumerate() {
            *r = *r
                - if x[i][feature] <= threshold { stump.left } else { stump.right };
        }
        stumps.push(stump);
    }

    StumpEnsemble { base, stumps }
}

fn fit_ridge<R: Real>(cfg: &LearnerConfig, x: &[[R; 4]], y: &[R], w: &[R]) -> RidgeModel<R> {
    let n = x.len();
    let nr = R::from_count(n);

    let mut means = [R::zero(); 4];
    for row in x {
        for j in 0..4 {
            means[j] += row[j];
        }
    }
    for m in &mut means {
        *m = *m / nr;
    }
    let mut sds = [R::zero(); 4];
    for row in x {
        for j in 0..4 {
            let d = row[j] - means[j];
            sds[j] += d * d;
        }
    }
    for s in &mut sds {
        *s = (*s / nr).sqrt();
        if *s < R::from_f64_lossy(1e-12) {
            *s = R::one();
        }
    }

    // Normal equations (XᵀWX + λI)β = XᵀWy on [1, standardized features].
    const D: usize = 5;
    let mut a = [R::zero(); D * D];
    let mut b = [R::zero(); D];
    for (row, (&yi, &wi)) in x.iter().zip(y.iter().zip(w)) {
        let mut z = [R::one(); D];
        for j in 0..4 {
            z[j + 1] = (row[j] - means[j]) / sds[j];
        }
        for j in 0..D {
            b[j] += wi * z[j] * yi;
            for j2 in j..D {
                a[j * D + j2] += wi * z[j] * z[j2];
            }
        }
    }
    for j in 0..D {
        for j2 in 0..j {
            a[j * D + j2] = a[j2 * D + j];
        }
        a[j * D + j] += R::from_f64_lossy(cfg.ridge_lambda);
    }
    let solved = cholesky_solve_in_place(&mut a, &mut b, D);
    assert!(solved, "ridge normal equations must be positive definite");
    RidgeModel { means, sds, coef: b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn stump_cfg(rounds: usize) -> LearnerConfig {
        LearnerConfig { rounds, ..LearnerConfig::default() }
    }

    #[test]
    fn all_zero_labels_fit_to_zero() {
        let x: Vec<[f64; 4]> = (0..50).map(|i| [i as f64, 0.0, 1.0, -1.0]).collect();
        let y = vec![0.0; 50];
        let w = vec![1.0; 50];
        for kind in [LearnerKind::Stumps, LearnerKind::Ridge] {
            let cfg = LearnerConfig { learner: kind, ..stump_cfg(50) };
            let model = fit_regressor(&cfg, &x, &y, &w);
            for probe in &x {
                assert!(model.predict(probe).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn stumps_recover_a_step_function() {
        let x: Vec<[f64; 4]> =
            (0..200).map(|i| [i as f64 / 100.0 - 1.0, 0.0, 0.0, 0.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] <= 0.2 { 1.0 } else { 3.0 }).collect();
        let w = vec![1.0; 200];
        let model = fit_regressor(&stump_cfg(150), &x, &y, &w);
        assert_relative_eq!(model.predict(&[-0.5, 0.0, 0.0, 0.0]), 1.0, epsilon = 0.02);
        assert_relative_eq!(model.predict(&[0.9, 0.0, 0.0, 0.0]), 3.0, epsilon = 0.02);
    }

    #[test]
    fn weights_steer_the_fit() {
        // Two clusters at the same x: the heavier one dominates the estimate.
        let x = vec![[0.0; 4]; 4];
        let y = vec![0.0, 0.0, 10.0, 10.0];
        let w_up = vec![9.0, 9.0, 1.0, 1.0];
        let model = fit_regressor(&stump_cfg(10), &x, &y, &w_up);
        assert_relative_eq!(model.predict(&[0.0; 4]), 1.0, epsilon = 1e-9);
        let w_down = vec![1.0, 1.0, 9.0, 9.0];
        let model = fit_regressor(&stump_cfg(10), &x, &y, &w_down);
        assert_relative_eq!(model.predict(&[0.0; 4]), 9.0, epsilon = 1e-9);
    }

    #[test]
    fn ridge_recovers_a_linear_signal() {
        let mut rng = substream(5, "test/ridge");
        let x: Vec<[f64; 4]> = (0..500)
            .map(|_| {
                [
                    rng.random::<f64>() * 4.0,
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 + 0.5 * r[0] - 1.5 * r[3]).collect();
        let w = vec![1.0; 500];
        let cfg = LearnerConfig { learner: LearnerKind::Ridge, ..LearnerConfig::default() };
        let model = fit_regressor(&cfg, &x, &y, &w);
        for probe in x.iter().take(20) {
            let truth = 2.0 + 0.5 * probe[0] - 1.5 * probe[3];
            assert_relative_eq!(model.predict(probe), truth, epsilon = 1e-6);
        }
    }

    #[test]
    fn refits_are_bit_identical_and_serde_stable() {
        let mut rng = substream(6, "test/stumps");
        let x: Vec<[f64; 4]> = (0..300)
            .map(|_| [rng.random(), rng.random(), rng.random(), rng.random()])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2]).collect();
        let w: Vec<f64> = (0..300).map(|i| 1.0 + (i % 7) as f64).collect();
        let a = fit_regressor(&stump_cfg(80), &x, &y, &w);
        let b = fit_regressor(&stump_cfg(80), &x, &y, &w);
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: Regressor<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn constant_features_produce_constant_prediction() {
        let x = vec![[1.0, 2.0, 3.0, 4.0]; 40];
        let y: Vec<f64> = (0..40).map(|i| f64::from(i % 3)).collect();
        let w = vec![1.0; 40];
        let mean = y.iter().sum::<f64>() / 40.0;
        for kind in [LearnerKind::Stumps, LearnerKind::Ridge] {
            let cfg = LearnerConfig { learner: kind, ..LearnerConfig::default() };
            let model = fit_regressor(&cfg, &x, &y, &w);
            assert_relative_eq!(model.predict(&[9.0; 4]), mean, epsilon = 1e-6);
        }
    }
}
