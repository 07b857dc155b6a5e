//! The campaign event loop for one arm: per-day request schedules, hourly
//! pacing ticks, auction resolution, click realization, budget stops, and
//! end-of-campaign visit labels. Fully deterministic given the root seed —
//! every random concern draws from its own named substream, and the market
//! draws are consumed one per request regardless of the bid, so a policy
//! change never shifts anyone else's randomness.

use serde::{Deserialize, Serialize};

use crate::bidding::{price_bid, BidderVariant, LoggingPolicy};
use crate::domain::{exposure_bin, Arm, ImpressionLog, Micros, UserId, VisitLabel};
use crate::harness::HarnessError;
use crate::market::{realize_click, Landscape, Population};
use crate::pacing::{PacingConfig, PacingState};
use crate::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// One row of the α trajectory: the multiplier in force during the hour that
/// just ended and the spend accumulated in that window (before the update).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacingRow {
    /// Global hour index from campaign start (day · 24 + hour-of-day).
    pub hour: u32,
    pub arm: Arm,
    pub alpha: f64,
    pub window_spend_micros: Micros,
}

/// Everything one arm's campaign produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRun {
    pub arm: Arm,
    /// One row per bid request, in event order. Empty for control.
    pub impressions: Vec<ImpressionLog>,
    /// One row per user served by this arm.
    pub labels: Vec<VisitLabel>,
    /// One row per pacing tick. Empty for control.
    pub pacing: Vec<PacingRow>,
    /// Final spend; equals the sum of `price_paid_micros` exactly.
    pub final_spend: Micros,
    pub final_alpha: f64,
}

/// Phase-and-arm campaign parameters.
pub(crate) struct CampaignSpec<'a> {
    /// Substream namespace: `"log"` for the logging campaign, `"ab"` for
    /// the A/B phase.
    pub phase: &'a str,
    pub arm: Arm,
    /// The users this campaign serves (determines labels and schedules).
    pub users: Vec<UserId>,
    pub days: u32,
    pub requests_per_user_per_day: f64,
    pub cpc: Micros,
    pub pacing: PacingConfig,
    pub budget: Micros,
}

/// The bidding behavior driving a campaign.
pub(crate) enum Policy<'a> {
    /// Pre-training policy (logging phase).
    Logging(LoggingPolicy),
    /// A trained arm (A/B phase).
    Trained(BidderVariant<'a>),
    /// Control: no auctions at all, only organic visits.
    Silent,
}

/// φ/pCVR cache: the multiplier depends only on (user, exposure bin), so one
/// campaign computes it at most `users × 8` times.
struct PhiCache {
    values: Vec<[(f64, f64); 8]>,
    filled: Vec<u8>,
}

impl PhiCache {
    fn new(n_users: usize) -> PhiCache {
        PhiCache { values: vec![[(0.0, 0.0); 8]; n_users], filled: vec![0; n_users] }
    }

    fn get(
        &mut self,
        slot: usize,
        bin_index: usize,
        compute: impl FnOnce() -> Result<(f64, f64), HarnessError>,
    ) -> Result<(f64, f64), HarnessError> {
        let mask = 1u8 << bin_index;
        if self.filled[slot] & mask == 0 {
            self.values[slot][bin_index] = compute()?;
            self.filled[slot] |= mask;
        }
        Ok(self.values[slot][bin_index])
    }
}

/// Run one arm's campaign.
pub(crate) fn run_campaign(
    population: &Population,
    landscape: &Landscape,
    spec: CampaignSpec<'_>,
    policy: &Policy<'_>,
    seed: u64,
) -> Result<ArmRun, HarnessError> {
    let arm = spec.arm;
    let days = spec.days as usize;

    // Control never enters the marketplace (and a zero-day campaign has no
    // marketplace hours): realize organic visits only.
    if matches!(policy, Policy::Silent) || days == 0 {
        let mut rng_visits = substream(seed, &format!("{}/visits/{arm}", spec.phase));
        let zero_schedule = vec![0u32; days];
        let labels = spec
            .users
            .iter()
            .map(|&u| population.realize_visits(u, &zero_schedule, &mut rng_visits))
            .collect();
        return Ok(ArmRun {
            arm,
            impressions: Vec::new(),
            labels,
            pacing: Vec::new(),
            final_spend: Micros::ZERO,
            final_alpha: 0.0,
        });
    }

    let mut rng_sched = substream(seed, &format!("{}/schedule/{arm}", spec.phase));
    let mut rng_market = substream(seed, &format!("{}/market/{arm}", spec.phase));
    let mut rng_click = substream(seed, &format!("{}/clicks/{arm}", spec.phase));
    let mut rng_visits = substream(seed, &format!("{}/visits/{arm}", spec.phase));

    let slot_count = population.slot_count();
    let horizon_hours = spec.days * 24;
    let mut pacer = PacingState::new(spec.pacing, spec.budget, horizon_hours);
    let mut pacing_rows = Vec::with_capacity(horizon_hours as usize);

    // user_id → dense index for per-user state.
    let max_id = spec.users.iter().copied().max().unwrap_or(0) as usize;
    let mut user_slot = vec![usize::MAX; max_id + 1];
    for (i, &u) in spec.users.iter().enumerate() {
        user_slot[u as usize] = i;
    }
    let mut exposure_count = vec![0u32; spec.users.len()];
    // Cumulative exposure in force on each day, filled at day end.
    let mut exposure_by_day = vec![vec![0u32; days]; spec.users.len()];
    let mut phi_cache = PhiCache::new(spec.users.len());

    let mut impressions: Vec<ImpressionLog> = Vec::new();
    let mut auction_id: u64 = 0;

    // (hour-of-day, user, slot); regenerated per day, stable-sorted by hour
    // so events within an hour keep their generation order.
    let mut events: Vec<(u8, UserId, u16)> = Vec::new();
    for day in 0..spec.days {
        events.clear();
        for &user_id in &spec.users {
            let n = draw_request_count(&mut rng_sched, spec.requests_per_user_per_day);
            for _ in 0..n {
                let hour: u8 = rng_sched.random_range(0..24);
                let slot: u16 = rng_sched.random_range(0..slot_count);
                events.push((hour, user_id, slot));
            }
        }
        events.sort_by_key(|e| e.0);

        let mut cursor = 0usize;
        for hour in 0..24u8 {
            while cursor < events.len() && events[cursor].0 == hour {
                let (_, user_id, slot_id) = events[cursor];
                cursor += 1;
                auction_id += 1;

                let dense = user_slot[user_id as usize];
                let count_before = exposure_count[dense];
                let bin_before = exposure_bin(count_before);
                let user = population.user(user_id);

                // The policy's multiplier for this user at this state —
                // computed (and logged) even when the budget stop or a
                // non-positive multiplier keeps the final bid at zero.
                let (phi, pcvr) = match policy {
                    Policy::Logging(p) => {
                        phi_cache.get(dense, bin_before.index(), || Ok(p.phi_pcvr(&user.features)))?
                    }
                    Policy::Trained(variant) => {
                        phi_cache.get(dense, bin_before.index(), || {
                            variant
                                .phi_pcvr(&user.features, count_before)?
                                .ok_or_else(|| unreachable!("silent arms use Policy::Silent"))
                        })?
                    }
                    Policy::Silent => unreachable!("handled above"),
                };

                let pctr = match policy {
                    Policy::Logging(_) => PRIOR_PCTR,
                    Policy::Trained(variant) => {
                        variant.pctr(slot_id).expect("trained policies price requests")
                    }
                    Policy::Silent => unreachable!(),
                };

                let bid = if pacer.exhausted() {
                    Micros::ZERO
                } else {
                    price_bid(spec.cpc, phi, pctr, pacer.alpha())
                };

                // Market draws happen once per request, bid or no bid.
                let outcome = landscape.run_auction(
                    bid,
                    population.competitor_shift(user_id),
                    &mut rng_market,
                );

                let clicked = if outcome.won {
                    exposure_count[dense] += 1;
                    pacer.record_payment(outcome.price_paid);
                    realize_click(population.slot_ctr(slot_id), &mut rng_click)?
                } else {
                    false
                };

                impressions.push(ImpressionLog {
                    user_id,
                    day,
                    hour,
                    auction_id,
                    arm,
                    slot_id,
                    features: user.features,
                    exposure_count_before: count_before,
                    bin_before,
                    phi,
                    pcvr,
                    bid_micros: bid,
                    won: outcome.won,
                    price_paid_micros: outcome.price_paid,
                    clearing_price_micros: outcome.clearing_price,
                    mechanism: outcome.mechanism,
                    clicked,
                });
            }

            let global_hour = day * 24 + u32::from(hour);
            if (global_hour + 1) % spec.pacing.cadence_hours == 0 {
                pacing_rows.push(PacingRow {
                    hour: global_hour,
                    arm,
                    alpha: pacer.alpha(),
                    window_spend_micros: pacer.window_spend(),
                });
                pacer.update_alpha();
            }
        }

        for dense in 0..spec.users.len() {
            exposure_by_day[dense][day as usize] = exposure_count[dense];
        }
    }

    let labels = spec
        .users
        .iter()
        .enumerate()
        .map(|(dense, &u)| population.realize_visits(u, &exposure_by_day[dense], &mut rng_visits))
        .collect();

    Ok(ArmRun {
        arm,
        impressions,
        labels,
        pacing: pacing_rows,
        final_spend: pacer.spend(),
        final_alpha: pacer.alpha(),
    })
}

/// Click model available before any training: the slot prior mean.
pub(crate) const PRIOR_PCTR: f64 = 0.01;

fn draw_request_count(rng: &mut impl Rng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite request rate");
    dist.sample(rng).min(10_000.0) as u32
}
