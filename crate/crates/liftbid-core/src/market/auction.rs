//! Auction resolution against the competitor landscape.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Mechanism, Micros};
use crate::market::config::LandscapeConfig;

/// Resolution of one auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub won: bool,
    pub mechanism: Mechanism,
    /// What we pay: own bid on first-price wins, the competing bid on
    /// second-price wins, zero on losses.
    pub price_paid: Micros,
    /// Present exactly on won second-price auctions.
    pub clearing_price: Option<Micros>,
    pub highest_competing_bid: Micros,
}

/// The competitor landscape: a log-normal highest competing bid whose
/// location can shift per user (the confounding channel).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landscape {
    config: LandscapeConfig,
}

impl Landscape {
    pub fn new(config: LandscapeConfig) -> Landscape {
        Landscape { config }
    }

    /// Resolve one auction. Ties lose. Draw order (mechanism, then the
    /// competing bid) is fixed and independent of `own_bid`, so a policy
    /// change never desynchronizes the market stream.
    pub fn run_auction(
        &self,
        own_bid: Micros,
        user_shift: f64,
        rng: &mut impl Rng,
    ) -> AuctionOutcome {
        let mechanism = if rng.random::<f64>() < self.config.second_price_fraction {
            Mechanism::SecondPrice
        } else {
            Mechanism::FirstPrice
        };
        let z: f64 = rng.sample(StandardNormal);
        let competing =
            Micros::from_f64_bid((self.config.mu_log + user_shift + self.config.sigma_log * z).exp());

        let won = own_bid > competing;
        let (price_paid, clearing_price) = match (won, mechanism) {
            (false, _) => (Micros::ZERO, None),
            (true, Mechanism::FirstPrice) => (own_bid, None),
            (true, Mechanism::SecondPrice) => (competing, Some(competing)),
        };
        AuctionOutcome { won, mechanism, price_paid, clearing_price, highest_competing_bid: competing }
    }
}
