//! Market configuration: population scale, request arrivals, competitor
//! landscape, slot click-through rates, and the hidden visit-dynamics
//! distributions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketConfigError {
    #[error("population_size must be > 0")]
    EmptyPopulation,
    #[error("{name} must be > 0, got {value}")]
    NonPositiveScale { name: &'static str, value: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    NotAFraction { name: &'static str, value: f64 },
}

/// Log-normal highest-competing-bid landscape.
///
/// `ln(competing bid in micros) = mu_log + shift(user) + sigma_log · N(0,1)`,
/// where `shift` couples the landscape to the user's value signal with
/// strength `confounding · confounding_scale` (zero confounding recovers an
/// i.i.d. landscape independent of user features).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Location of ln(highest competing bid), bid in micros.
    pub mu_log: f64,
    /// Scale of ln(highest competing bid).
    pub sigma_log: f64,
    /// Fraction of auctions run second-price (the rest are first-price).
    pub second_price_fraction: f64,
    /// Confounding strength in [0, 1]: how strongly competitor bids follow
    /// the same user-value signal the logging policy bids on.
    pub confounding: f64,
    /// Landscape shift per standard unit of the user-value signal, applied
    /// multiplied by `confounding`.
    pub confounding_scale: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            mu_log: 8.0, // median competing bid ≈ 2981 micros
            sigma_log: 0.8,
            second_price_fraction: 0.2,
            confounding: 0.6,
            confounding_scale: 0.5,
        }
    }
}

/// Beta-distributed true click-through rates for the ad slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlotConfig {
    pub count: u16,
    /// Beta(alpha, beta) for slot CTR; defaults give mean 1%.
    pub ctr_alpha: f64,
    pub ctr_beta: f64,
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self { count: 20, ctr_alpha: 2.0, ctr_beta: 198.0 }
    }
}

/// Distributions of the hidden per-user visit-dynamics coefficients.
///
/// Daily visit probability at exposure count `s` is
/// `sigmoid(β0 + β1·ln(1+s) − β2·s)`: β0 sets the organic level, β1 the
/// wear-in (rising marginal effect early), β2 the wear-out (eventual decay).
/// The wear-in coefficient is drawn anti-correlated with β0 so that the users
/// most responsive to ads are not the users who visit anyway — the population
/// structure that separates lift bidding from conversion-rate bidding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutcomeConfig {
    /// Mean of β0 (logit of the daily organic visit probability).
    pub beta0_mean: f64,
    /// Standard deviation of β0.
    pub beta0_sd: f64,
    /// Location of the wear-in coefficient before the softplus.
    pub wearin_loc: f64,
    /// Scale of the wear-in coefficient before the softplus.
    pub wearin_scale: f64,
    /// Correlation in [0, 1] between low organic level and high wear-in.
    pub organic_lift_anticorr: f64,
    /// Half-normal scale of the wear-out coefficient β2.
    pub wearout_sd: f64,
    /// Minimum wear-out coefficient.
    pub wearout_min: f64,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        Self {
            beta0_mean: -3.0,
            beta0_sd: 0.8,
            wearin_loc: 0.3,
            wearin_scale: 0.8,
            organic_lift_anticorr: 0.6,
            wearout_sd: 0.05,
            wearout_min: 0.02,
        }
    }
}

/// Full synthetic-market configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub population_size: usize,
    /// Days in one campaign phase (logging and A/B phases may override).
    pub campaign_days: u32,
    /// Poisson mean of bid requests per user per day.
    pub auctions_per_user_per_day: f64,
    pub landscape: LandscapeConfig,
    pub slots: SlotConfig,
    pub outcome: OutcomeConfig,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            population_size: 50_000,
            campaign_days: 7,
            auctions_per_user_per_day: 3.0,
            landscape: LandscapeConfig::default(),
            slots: SlotConfig::default(),
            outcome: OutcomeConfig::default(),
            seed: 0,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<(), MarketConfigError> {
        if self.population_size == 0 {
            return Err(MarketConfigError::EmptyPopulation);
        }
        let positives = [
            ("auctions_per_user_per_day", self.auctions_per_user_per_day),
            ("landscape.sigma_log", self.landscape.sigma_log),
            ("slots.ctr_alpha", self.slots.ctr_alpha),
            ("slots.ctr_beta", self.slots.ctr_beta),
            ("slots.count", f64::from(self.slots.count)),
            ("outcome.beta0_sd", self.outcome.beta0_sd),
            ("outcome.wearin_scale", self.outcome.wearin_scale),
            ("outcome.wearout_sd", self.outcome.wearout_sd),
        ];
        for (name, value) in positives {
            if !value.is_finite() || value <= 0.0 {
                return Err(MarketConfigError::NonPositiveScale { name, value });
            }
        }
        let fractions = [
            ("landscape.second_price_fraction", self.landscape.second_price_fraction),
            ("landscape.confounding", self.landscape.confounding),
            ("outcome.organic_lift_anticorr", self.outcome.organic_lift_anticorr),
        ];
        for (name, value) in fractions {
            if !(0.0..=1.0).contains(&value) {
                return Err(MarketConfigError::NotAFraction { name, value });
            }
        }
        Ok(())
    }
}
