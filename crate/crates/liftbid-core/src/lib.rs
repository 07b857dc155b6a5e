//! Lift-based bidding for retail display advertising.
//!
//! The crate bundles everything needed to study *causal lift bidding* — bidding
//! in proportion to the incremental store visits an ad impression causes rather
//! than the visits it merely precedes — in a closed synthetic market:
//!
//! * [`market`] — a seeded population of users with hidden visit dynamics, plus
//!   a first/second-price auction landscape. The ground-truth lift of every
//!   additional exposure is available as an oracle for evaluation only.
//! * [`learning`] — counterfactual estimation of per-exposure-state visit
//!   predictors from logged data, either naively (empirical risk minimization)
//!   or with inverse-propensity-score weighting and percentile clipping, and
//!   the normalization that turns predicted lift into a bid multiplier with
//!   population mean one.
//! * [`bidding`] — turns the lift multiplier, cost-per-click, and predicted
//!   click-through rate into an integer-micro bid.
//! * [`pacing`] — a multiplicative feedback controller that keeps campaign
//!   spend on a fixed budget schedule.
//! * [`harness`] — the two-phase pipeline (logging campaign, then a five-arm
//!   A/B experiment) and the metrics report comparing the arms.
//! * [`logio`] — the JSONL / CSV file formats shared by the phases.
//!
//! Numeric code in [`learning`] is generic over the scalar type through
//! [`scalar::Real`]; the crate root re-exports `f64` aliases for the common
//! case. Money is held in integer micro-currency units ([`domain::Micros`]) so
//! that reports are byte-reproducible.
//!
//! All randomness descends from one `u64` seed via labeled substreams
//! ([`rng::substream`]), so every pipeline stage is deterministic given its
//! inputs.

pub mod bidding;
pub mod domain;
pub mod harness;
pub mod learning;
pub mod logio;
pub mod market;
pub mod pacing;
pub mod rng;
pub mod scalar;
pub mod testing;

pub use domain::{Arm, ExposureBin, Features, Mechanism, Micros, UserId};
pub use scalar::Real;

/// `f64` lift model bundle, the variant produced by the shipped pipeline.
pub type ModelBundle = learning::ModelBundle<f64>;
/// `f64` per-exposure-state outcome predictor.
pub type OutcomePredictor = learning::OutcomePredictor<f64>;
/// `f64` propensity model.
pub type PropensityModel = learning::PropensityModel<f64>;
