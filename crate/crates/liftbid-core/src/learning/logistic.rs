//! Multinomial logistic regression over the eight exposure bins, fitted by a
//! damped Newton method. Convex objective + deterministic iteration order =
//! bit-reproducible parameters for identical inputs.

use serde::{Deserialize, Serialize};

use crate::domain::ExposureBin;
use crate::learning::linalg::cholesky_solve_in_place;
use crate::scalar::Real;

const K: usize = ExposureBin::COUNT; // classes
const D: usize = 5; // bias + 4 features
const P: usize = K * D; // parameter count

/// Calibrated multi-class model mapping features to a probability vector
/// over the eight exposure bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MultinomialLogistic<R: Real> {
    feature_means: [R; 4],
    feature_sds: [R; 4],
    /// Row-major `K × D` weights on `[1, standardized features…]`.
    weights: Vec<R>,
}

impl<R: Real> MultinomialLogistic<R> {
    /// Fit by Newton's method with an L2 penalty of `l2 · n` on the feature
    /// weights and a fixed ridge of `l2` on the intercepts — softmax is
    /// overparameterized, so the flat directions need *some* curvature, but
    /// shrinking the intercepts toward zero would bias the recovered class
    /// frequencies, hence the n-independent (vanishing per sample) penalty
    /// there.
    pub fn fit(
        x: &[[R; 4]],
        class: &[ExposureBin],
        l2: f64,
        max_iters: usize,
    ) -> MultinomialLogistic<R> {
        assert_eq!(x.len(), class.len());
        assert!(!x.is_empty(), "logistic fit requires data");
        let n = x.len();
        let (feature_means, feature_sds) = standardization(x);
        let designs: Vec<[R; D]> =
            x.iter().map(|row| design_row(row, &feature_means, &feature_sds)).collect();

        let lambda = R::from_f64_lossy(l2) * R::from_count(n);
        let lambda0 = R::from_f64_lossy(l2);
        let mut weights = vec![R::zero(); P];
        let mut loss = penalized_nll(&weights, &designs, class, lambda, lambda0);

        for _ in 0..max_iters {
            // Gradient and Hessian of Σ −log p_y + (λ/2)‖W‖².
            let mut grad = vec![R::zero(); P];
            let mut hess = vec![R::zero(); P * P];
            for (row, &y) in designs.iter().zip(class) {
                let p = softmax(&weights, row);
                for k in 0..K {
                    let delta =
                        if k == y.index() { p[k] - R::one() } else { p[k] };
                    for j in 0..D {
                        grad[k * D + j] += delta * row[j];
                    }
                }
                // Hessian block (k,k') is (δ_{kk'} p_k − p_k p_{k'}) · x xᵀ.
                for k in 0..K {
                    for k2 in k..K {
                        let m = if k == k2 { p[k] * (R::one() - p[k]) } else { -(p[k] * p[k2]) };
                        if m == R::zero() {
                            continue;
                        }
                        for j in 0..D {
                            let mj = m * row[j];
                            for j2 in 0..D {
                                let v = mj * row[j2];
                                hess[(k * D + j) * P + (k2 * D + j2)] += v;
                                if k2 != k {
                                    hess[(k2 * D + j2) * P + (k * D + j)] += v;
                                }
                            }
                        }
                    }
                }
            }
            for i in 0..P {
                let lam = if i % D == 0 { lambda0 } else { lambda };
                grad[i] += lam * weights[i];
                hess[i * P + i] += lam;
            }

            let grad_norm =
                grad.iter().fold(R::zero(), |m, g| if g.abs() > m { g.abs() } else { m });
            if grad_norm < R::from_f64_lossy(1e-10) * R::from_count(n.max(1)) {
                break;
            }

            let mut step = grad.clone();
            if !cholesky_solve_in_place(&mut hess, &mut step, P) {
                break; // numerically singular; keep current weights
            }

            // Backtracking line search on the penalized NLL.
            let mut scale = R::one();
            let mut improved = false;
            for _ in 0..30 {
                let candidate: Vec<R> = weights
                    .iter()
                    .zip(&step)
                    .map(|(&w, &s)| w - scale * s)
                    .collect();
                let cand_loss = penalized_nll(&candidate, &designs, class, lambda, lambda0);
                if cand_loss < loss {
                    weights = candidate;
                    loss = cand_loss;
                    improved = true;
                    break;
                }
                scale = scale / (R::one() + R::one());
            }
            if !improved {
                break;
            }
        }

        MultinomialLogistic { feature_means, feature_sds, weights }
    }

    /// Probability vector over the eight bins.
    pub fn predict_proba(&self, x: &[R; 4]) -> [R; K] {
        let row = design_row(x, &self.feature_means, &self.feature_sds);
        softmax(&self.weights, &row)
    }
}

fn standardization<R: Real>(x: &[[R; 4]]) -> ([R; 4], [R; 4]) {
    let n = R::from_count(x.len());
    let mut means = [R::zero(); 4];
    for row in x {
        for j in 0..4 {
            means[j] += row[j];
        }
    }
    for m in &mut means {
        *m = *m / n;
    }
    let mut sds = [R::zero(); 4];
    for row in x {
        for j in 0..4 {
            let d = row[j] - means[j];
            sds[j] += d * d;
        }
    }
    for s in &mut sds {
        *s = (*s / n).sqrt();
        if *s < R::from_f64_lossy(1e-12) {
            *s = R::one(); // constant feature: leave it centered only
        }
    }
    (means, sds)
}

fn design_row<R: Real>(x: &[R; 4], means: &[R; 4], sds: &[R; 4]) -> [R; D] {
    let mut row = [R::one(); D];
    for j in 0..4 {
        row[j + 1] = (x[j] - means[j]) / sds[j];
    }
    row
}

fn softmax<R: Real>(weights: &[R], row: &[R; D]) -> [R; K] {
    let mut logits = [R::zero(); K];
    for k in 0..K {
        let mut z = R::zero();
        for j in 0..D {
            z += weights[k * D + j] * row[j];
        }
        logits[k] = z;
    }
    let max = logits.iter().fold(logits[0], |m, &z| if z > m { z } else { m });
    let mut sum = R::zero();
    let mut out = [R::zero(); K];
    for k in 0..K {
        out[k] = (logits[k] - max).exp();
        sum += out[k];
    }
    for v in &mut out {
        *v = *v / sum;
    }
    out
}

fn penalized_nll<R: Real>(
    weights: &[R],
    designs: &[[R; D]],
    class: &[ExposureBin],
    lambda: R,
    lambda0: R,
) -> R {
    let mut nll = R::zero();
    for (row, &y) in designs.iter().zip(class) {
        let p = softmax(weights, row);
        let py = p[y.index()].max(R::from_f64_lossy(1e-300));
        nll += -(py.ln());
    }
    let mut penalty = R::zero();
    for (i, &w) in weights.iter().enumerate() {
        let lam = if i % D == 0 { lambda0 } else { lambda };
        penalty += lam * w * w;
    }
    nll + penalty / R::from_f64_lossy(2.0)
}
