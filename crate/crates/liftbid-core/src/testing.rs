//! A tiny, exhaustively enumerable world for validating the risk estimators
//! against exact expectations: four feature values, two exposure states, a
//! known joint law, and a confounded exposure assignment whose strength is a
//! single knob. Intended for tests and validation harnesses.

use rand::Rng;

/// The four-point feature distribution with a two-state exposure assignment.
///
/// A user has feature index `i ∈ {0,1,2,3}` with probability `q[i]`, ends up
/// exposed with probability `e(i) = 0.5 + gamma · tilt[i]`, and converts
/// with probability `p_exposed[i]` (exposed) or `p_unexposed[i]` (not).
/// With `gamma > 0`, exposure concentrates on the high-conversion feature
/// values — the same selection pressure a value-proportional bidding policy
/// creates — so the plain sample mean of a loss over the exposed subset no
/// longer estimates its population expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyWorld {
    pub q: [f64; 4],
    pub p_exposed: [f64; 4],
    pub p_unexposed: [f64; 4],
    pub gamma: f64,
}

/// Per-feature exposure tilt at full confounding strength.
const TILT: [f64; 4] = [-0.4, -0.15, 0.15, 0.4];

/// Simple fixed predictors of the exposed-state outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToyPredictor {
    /// Predicts the same value everywhere.
    Constant(f64),
    /// Predicts `slope · i` for feature index `i`.
    Scaled(f64),
    /// Predicts the true exposed conversion probability.
    Oracle,
}

impl ToyWorld {
    /// The standard world at confounding strength `gamma ∈ [0, 1]`.
    pub fn new(gamma: f64) -> ToyWorld {
        assert!((0.0..=1.0).contains(&gamma), "gamma must be in [0, 1]");
        ToyWorld {
            q: [0.4, 0.3, 0.2, 0.1],
            p_exposed: [0.1, 0.3, 0.6, 0.9],
            p_unexposed: [0.05, 0.15, 0.3, 0.45],
            gamma,
        }
    }

    /// Probability of ending up exposed given feature index `i`; always in
    /// (0, 1) for `gamma ≤ 1`.
    pub fn exposure_propensity(&self, i: usize) -> f64 {
        0.5 + self.gamma * TILT[i]
    }

    pub fn predict(&self, predictor: ToyPredictor, i: usize) -> f64 {
        match predictor {
            ToyPredictor::Constant(c) => c,
            ToyPredictor::Scaled(slope) => slope * i as f64,
            ToyPredictor::Oracle => self.p_exposed[i],
        }
    }

    /// Expected squared error of a prediction `f` against a Bernoulli(`p`)
    /// outcome: `(f − p)² + p(1 − p)`.
    fn pointwise_loss(f: f64, p: f64) -> f64 {
        (f - p) * (f - p) + p * (1.0 - p)
    }

    /// The exact population risk of a predictor over the exposed state,
    /// enumerated over the full joint law (no sampling):
    /// `Σ_i q[i] · E[(f(i) − y)² | exposed]`.
    pub fn ideal_exposed_loss(&self, predictor: ToyPredictor) -> f64 {
        (0..4)
            .map(|i| self.q[i] * Self::pointwise_loss(self.predict(predictor, i), self.p_exposed[i]))
            .sum()
    }

    /// What the exposed-subset sample mean of the loss converges to under
    /// the confounded assignment (the selection-weighted risk): the exact
    /// infinite-sample limit of the plain estimator.
    pub fn selection_weighted_exposed_loss(&self, predictor: ToyPredictor) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..4 {
            let w = self.q[i] * self.exposure_propensity(i);
            num += w * Self::pointwise_loss(self.predict(predictor, i), self.p_exposed[i]);
            den += w;
        }
        num / den
    }

    /// Draw one logged dataset of `n` independent users.
    pub fn sample_log(&self, n: usize, rng: &mut impl Rng) -> ToyLog {
        let mut log = ToyLog {
            x_index: Vec::with_capacity(n),
            exposed: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut i = 0;
            let mut acc = self.q[0];
            while u >= acc && i < 3 {
                i += 1;
                acc += self.q[i];
            }
            let exposed = rng.random::<f64>() < self.exposure_propensity(i);
            let p = if exposed { self.p_exposed[i] } else { self.p_unexposed[i] };
            let y = f64::from(u8::from(rng.random::<f64>() < p));
            log.x_index.push(i);
            log.exposed.push(exposed);
            log.y.push(y);
        }
        log
    }
}

/// One sampled logged dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLog {
    pub x_index: Vec<usize>,
    pub exposed: Vec<bool>,
    pub y: Vec<f64>,
}

/// The exposed subset of a log, shaped for the risk estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposedSubset {
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub propensities: Vec<f64>,
    /// Size of the FULL log the subset came from.
    pub total_n: usize,
}

impl ToyLog {
    pub fn len(&self) -> usize {
        self.x_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_index.is_empty()
    }

    /// Extract the exposed rows with a predictor's outputs and the exact
    /// assignment propensities.
    pub fn exposed_subset(&self, world: &ToyWorld, predictor: ToyPredictor) -> ExposedSubset {
        let mut out = ExposedSubset {
            predictions: Vec::new(),
            targets: Vec::new(),
            propensities: Vec::new(),
            total_n: self.len(),
        };
        for j in 0..self.len() {
            if self.exposed[j] {
                let i = self.x_index[j];
                out.predictions.push(world.predict(predictor, i));
                out.targets.push(self.y[j]);
                out.propensities.push(world.exposure_propensity(i));
            }
        }
        out
    }
}
