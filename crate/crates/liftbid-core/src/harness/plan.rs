//! The experiment plan: one structure holding everything a full two-phase
//! run needs — market, learner, pacing, phase lengths, budgets, and the seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Arm, Micros};
use crate::learning::LearnerConfig;
use crate::market::{MarketConfig, MarketConfigError};
use crate::pacing::{PacingConfig, PacingConfigError};

/// Phase lengths, prices, and budgets.
///
/// The logging campaign runs the pre-training policy at a fixed α over the
/// whole population; the A/B phase then runs the five arms on disjoint user
/// fifths. Each experimental arm's budget is `experimental_budget_ratio`
/// times the baseline budget (control always gets zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub logging_days: u32,
    /// Fixed pacing multiplier during the logging campaign (no budget).
    pub logging_alpha: f64,
    pub ab_days: u32,
    /// What the advertiser pays per click, in micros.
    pub cpc_micros: Micros,
    pub baseline_budget_micros: Micros,
    pub experimental_budget_ratio: f64,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            logging_days: 7,
            logging_alpha: 0.5,
            ab_days: 7,
            cpc_micros: Micros(1_000_000),
            baseline_budget_micros: Micros(100_000_000),
            experimental_budget_ratio: 0.1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Market(#[from] MarketConfigError),
    #[error(transparent)]
    Pacing(#[from] PacingConfigError),
    #[error("experiment {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("logging_alpha must lie in (0, 1], got {0}")]
    BadLoggingAlpha(f64),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.logging_alpha > 0.0 && self.logging_alpha <= 1.0) {
            return Err(PlanError::BadLoggingAlpha(self.logging_alpha));
        }
        let positives = [
            ("logging_days", f64::from(self.logging_days)),
            ("ab_days", f64::from(self.ab_days)),
            ("cpc_micros", self.cpc_micros.as_f64()),
            ("baseline_budget_micros", self.baseline_budget_micros.as_f64()),
            ("experimental_budget_ratio", self.experimental_budget_ratio),
        ];
        for (name, value) in positives {
            if !value.is_finite() || value <= 0.0 {
                return Err(PlanError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Everything one seeded end-to-end run needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub market: MarketConfig,
    pub learner: LearnerConfig,
    pub pacing: PacingConfig,
    pub experiment: ExperimentConfig,
    /// Root seed; expanded into named substreams per phase, arm, and
    /// concern. Supersedes `market.seed` throughout the pipeline.
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn with_seed(seed: u64) -> ExperimentPlan {
        ExperimentPlan { seed, ..ExperimentPlan::default() }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        self.market.validate()?;
        self.pacing.validate()?;
        self.experiment.validate()
    }

    /// A/B budget for an arm: full for baseline, the configured ratio for
    /// the experimental arms, zero for control.
    pub fn budget(&self, arm: Arm) -> Micros {
        let base = self.experiment.baseline_budget_micros;
        match arm {
            Arm::Baseline => base,
            Arm::Naive | Arm::Unbiased | Arm::Noclip => {
                Micros::from_f64_bid(base.as_f64() * self.experiment.experimental_budget_ratio)
            }
            Arm::Control => Micros::ZERO,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_validates() {
        assert_eq!(ExperimentPlan::default().validate(), Ok(()));
    }

    #[test]
    fn budgets_follow_the_ratio() {
        let plan = ExperimentPlan::default();
        assert_eq!(plan.budget(Arm::Baseline), Micros(100_000_000));
        assert_eq!(plan.budget(Arm::Naive), Micros(10_000_000));
        assert_eq!(plan.budget(Arm::Unbiased), Micros(10_000_000));
        assert_eq!(plan.budget(Arm::Noclip), Micros(10_000_000));
        assert_eq!(plan.budget(Arm::Control), Micros::ZERO);
    }

    #[test]
    fn invalid_sections_are_rejected_with_field_names() {
        let mut plan = ExperimentPlan::default();
        plan.experiment.logging_alpha = 0.0;
        assert_eq!(plan.validate(), Err(PlanError::BadLoggingAlpha(0.0)));

        let mut plan = ExperimentPlan::default();
        plan.experiment.ab_days = 0;
        assert!(matches!(
            plan.validate(),
            Err(PlanError::NonPositive { name: "ab_days", .. })
        ));

        let mut plan = ExperimentPlan::default();
        plan.market.population_size = 0;
        assert_eq!(plan.validate(), Err(PlanError::Market(MarketConfigError::EmptyPopulation)));

        let mut plan = ExperimentPlan::default();
        plan.pacing.alpha_min = 0.0;
        assert!(matches!(plan.validate(), Err(PlanError::Pacing(_))));
    }

    #[test]
    fn toml_round_trip_with_partial_sections() {
        let text = "seed = 9\n\n[market]\npopulation_size = 500\n\n[experiment]\nab_days = 3\n";
        let plan: ExperimentPlan = toml::from_str(text).unwrap();
        assert_eq!(plan.seed, 9);
        assert_eq!(plan.market.population_size, 500);
        assert_eq!(plan.experiment.ab_days, 3);
        assert_eq!(plan.experiment.logging_days, 7);
        let back: ExperimentPlan = toml::from_str(&toml::to_string(&plan).unwrap()).unwrap();
        assert_eq!(back, plan);
    }
}
