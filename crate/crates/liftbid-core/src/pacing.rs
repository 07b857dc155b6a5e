//! Budget pacing: a damped multiplicative controller that scales every bid
//! by α and nudges α each tick so spend tracks a constant hourly target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Micros;

/// Controller constants. α is clamped to `[alpha_min, alpha_max]` after
/// every update; κ damps the multiplicative correction (`0.5` = square-root
/// damping); a window with zero spend multiplies α by `zero_spend_boost`
/// instead (the ratio rule would divide by zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacingConfig {
    pub kappa: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub zero_spend_boost: f64,
    pub cadence_hours: u32,
    pub initial_alpha: f64,
}

impl Default for PacingConfig {
    fn default() -> PacingConfig {
        PacingConfig {
            kappa: 0.5,
            alpha_min: 0.01,
            alpha_max: 1.0,
            zero_spend_boost: 1.25,
            cadence_hours: 1,
            initial_alpha: 0.1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PacingConfigError {
    #[error("pacing bounds must satisfy 0 < alpha_min <= alpha_max <= 1, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("pacing {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("pacing cadence_hours must be positive")]
    ZeroCadence,
}

impl PacingConfig {
    pub fn validate(&self) -> Result<(), PacingConfigError> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max <= 1.0) {
            return Err(PacingConfigError::BadBounds(self.alpha_min, self.alpha_max));
        }
        for (name, value) in [
            ("kappa", self.kappa),
            ("zero_spend_boost", self.zero_spend_boost),
            ("initial_alpha", self.initial_alpha),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(PacingConfigError::NonPositive { name, value });
            }
        }
        if self.cadence_hours == 0 {
            return Err(PacingConfigError::ZeroCadence);
        }
        Ok(())
    }
}

/// One arm's live pacing state. Owned by that arm's event loop: payments and
/// α updates are applied in event order, and `alpha()` reads the value as of
/// the latest tick. Spend is exactly the sum of recorded payments.
#[derive(Debug, Clone, PartialEq)]
pub struct PacingState {
    cfg: PacingConfig,
    alpha: f64,
    budget: Micros,
    spend: Micros,
    window_spend: Micros,
    horizon_hours: u32,
}

impl PacingState {
    pub fn new(cfg: PacingConfig, budget: Micros, horizon_hours: u32) -> PacingState {
        debug_assert!(cfg.validate().is_ok(), "invalid pacing config: {cfg:?}");
        debug_assert!(horizon_hours > 0, "campaign horizon must be positive");
        PacingState {
            alpha: cfg.initial_alpha.clamp(cfg.alpha_min, cfg.alpha_max),
            cfg,
            budget,
            spend: Micros::ZERO,
            window_spend: Micros::ZERO,
            horizon_hours,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn budget(&self) -> Micros {
        self.budget
    }

    pub fn spend(&self) -> Micros {
        self.spend
    }

    /// Spend accumulated since the last α update.
    pub fn window_spend(&self) -> Micros {
        self.window_spend
    }

    /// True once spend has reached the budget; the arm stops bidding.
    pub fn exhausted(&self) -> bool {
        self.spend.0 >= self.budget.0
    }

    /// Account a won auction's payment (exact integer arithmetic).
    pub fn record_payment(&mut self, price: Micros) {
        self.spend += price;
        self.window_spend += price;
    }

    /// Cadence tick: compare the window's spend rate to the constant target
    /// rate `budget / horizon` and correct α multiplicatively:
    /// `α' = clamp(α · (target_rate / actual_rate)^κ, α_min, α_max)`,
    /// or `α' = clamp(α · boost, ·)` when the window spent nothing.
    /// Resets the window and returns the new α.
    pub fn update_alpha(&mut self) -> f64 {
        let target_rate = self.budget.as_f64() / f64::from(self.horizon_hours);
        let actual_rate = self.window_spend.as_f64() / f64::from(self.cfg.cadence_hours);
        let proposed = if actual_rate == 0.0 {
            self.alpha * self.cfg.zero_spend_boost
        } else {
            self.alpha * (target_rate / actual_rate).powf(self.cfg.kappa)
        };
        self.alpha = proposed.clamp(self.cfg.alpha_min, self.cfg.alpha_max);
        self.window_spend = Micros::ZERO;
        self.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(budget_micros: i64, horizon: u32, initial_alpha: f64) -> PacingState {
        let cfg = PacingConfig { initial_alpha, ..PacingConfig::default() };
        PacingState::new(cfg, Micros(budget_micros), horizon)
    }

    #[test]
    fn on_target_rate_leaves_alpha_unchanged() {
        // budget 2_400 µ over 24 h → target 100 µ/h; spend exactly 100 µ.
        let mut s = state(2_400, 24, 0.5);
        s.record_payment(Micros(100));
        assert_relative_eq!(s.update_alpha(), 0.5);
    }

    #[test]
    fn four_times_target_halves_alpha() {
        let mut s = state(2_400, 24, 0.5);
        s.record_payment(Micros(400));
        assert_relative_eq!(s.update_alpha(), 0.25);
    }

    #[test]
    fn quarter_target_doubles_alpha_subject_to_cap() {
        let mut s = state(2_400, 24, 0.3);
        s.record_payment(Micros(25));
        assert_relative_eq!(s.update_alpha(), 0.6);
        // Same ratio from α = 0.9 hits the cap instead of reaching 1.8.
        let mut s = state(2_400, 24, 0.9);
        s.record_payment(Micros(25));
        assert_relative_eq!(s.update_alpha(), 1.0);
    }

    #[test]
    fn zero_spend_window_boosts_alpha_by_factor() {
        let mut s = state(2_400, 24, 0.4);
        assert_relative_eq!(s.update_alpha(), 0.5);
        // Boost is capped at alpha_max.
        let mut s = state(2_400, 24, 0.9);
        assert_relative_eq!(s.update_alpha(), 1.0);
    }

    #[test]
    fn overspend_floors_at_alpha_min() {
        let mut s = state(24, 24, 0.02);
        s.record_payment(Micros(1_000_000));
        assert_relative_eq!(s.update_alpha(), 0.01);
    }

    #[test]
    fn update_resets_window_but_not_spend() {
        let mut s = state(2_400, 24, 0.5);
        s.record_payment(Micros(70));
        s.record_payment(Micros(30));
        assert_eq!(s.window_spend(), Micros(100));
        assert_eq!(s.spend(), Micros(100));
        s.update_alpha();
        assert_eq!(s.window_spend(), Micros::ZERO);
        assert_eq!(s.spend(), Micros(100));
    }

    #[test]
    fn exhaustion_is_spend_at_or_above_budget() {
        let mut s = state(100, 24, 0.5);
        s.record_payment(Micros(99));
        assert!(!s.exhausted());
        s.record_payment(Micros(1));
        assert!(s.exhausted());
        s.record_payment(Micros(5));
        assert!(s.exhausted());
        // Zero budget is exhausted from the start.
        assert!(state(0, 24, 0.5).exhausted());
    }

    #[test]
    fn initial_alpha_is_clamped() {
        let cfg = PacingConfig { initial_alpha: 0.001, ..PacingConfig::default() };
        assert_relative_eq!(PacingState::new(cfg, Micros(1), 1).alpha(), 0.01);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = PacingConfig::default();
        assert_eq!(ok.validate(), Ok(()));
        let bad = PacingConfig { alpha_min: 0.0, ..ok };
        assert!(matches!(bad.validate(), Err(PacingConfigError::BadBounds(..))));
        let bad = PacingConfig { alpha_max: 1.5, ..ok };
        assert!(matches!(bad.validate(), Err(PacingConfigError::BadBounds(..))));
        let bad = PacingConfig { kappa: -1.0, ..ok };
        assert!(matches!(bad.validate(), Err(PacingConfigError::NonPositive { name: "kappa", .. })));
        let bad = PacingConfig { cadence_hours: 0, ..ok };
        assert_eq!(bad.validate(), Err(PacingConfigError::ZeroCadence));
    }

    proptest! {
        /// Spending above target never raises α; below target never lowers it.
        #[test]
        fn directionality_and_bounds(
            alpha in 0.01f64..=1.0,
            budget in 1_000i64..10_000_000,
            horizon in 1u32..200,
            window in 0i64..20_000_000,
        ) {
            let mut s = state(budget, horizon, alpha);
            let before = s.alpha();
            s.record_payment(Micros(window));
            let target = budget as f64 / f64::from(horizon);
            let actual = window as f64;
            let after = s.update_alpha();
            prop_assert!((0.01..=1.0).contains(&after));
            if actual > target {
                prop_assert!(after <= before);
            } else if actual < target {
                prop_assert!(after >= before);
            }
        }
    }
}
