//! The synthetic marketplace: population generation with hidden visit
//! dynamics, bid-request arrivals, auction resolution, and click/visit
//! realization. Ground truth is exposed only through evaluation oracles.

mod auction;
mod config;
mod population;

pub use auction::{AuctionOutcome, Landscape};
pub use config::{LandscapeConfig, MarketConfig, MarketConfigError, OutcomeConfig, SlotConfig};
pub use population::Population;

use rand::Rng;

/// Bernoulli click draw at the slot's true click-through rate.
pub fn realize_click(true_slot_ctr: f64, rng: &mut impl Rng) -> Result<bool, MarketConfigError> {
    if !(0.0..=1.0).contains(&true_slot_ctr) {
        return Err(MarketConfigError::NotAFraction {
            name: "true_slot_ctr",
            value: true_slot_ctr,
        });
    }
    Ok(rng.random::<f64>() < true_slot_ctr)
}
