//! Synthetic user population with ground-truth visit dynamics.
//!
//! Bidders only ever see [`UserProfile`]; the coefficients driving each
//! user's daily visit probability stay private to this module and are exposed
//! solely through evaluation oracles (`true_visit_prob`, lift queries) that
//! the benchmark — never a bidding policy — consults.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{exposure_bin, Arm, ExposureBin, Features, UserId, UserProfile, VisitLabel};
use crate::market::config::{MarketConfig, MarketConfigError};
use crate::rng::substream;
use crate::scalar::sigmoid;

/// Hidden per-user visit-dynamics coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct OutcomeParams {
    /// Logit of the daily organic visit probability.
    beta0: f64,
    /// Wear-in: marginal effect of early exposures (coefficient on ln(1+s)).
    beta1: f64,
    /// Wear-out: linear decay with accumulated exposures.
    beta2: f64,
}

impl OutcomeParams {
    pub(crate) fn new(beta0: f64, beta1: f64, beta2: f64) -> Self {
        Self { beta0, beta1, beta2 }
    }

    /// Daily visit probability at exposure count `s`.
    pub(crate) fn daily_visit_prob(&self, s: u32) -> f64 {
        let s = s as f64;
        sigmoid(self.beta0 + self.beta1 * (1.0 + s).ln() - self.beta2 * s)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// The generated market population: observable profiles plus hidden state.
#[derive(Debug, Clone)]
pub struct Population {
    days: u32,
    users: Vec<UserProfile>,
    outcomes: Vec<OutcomeParams>,
    /// Per-user additive shift of the competitor landscape location
    /// (standardized value signal × confounding strength).
    competitor_shift: Vec<f64>,
    /// True click-through rate per slot.
    slot_ctr: Vec<f64>,
}

impl Population {
    /// Draw a population from `config` under `seed`. Deterministic: the same
    /// `(config, seed)` always yields the identical population.
    pub fn generate(config: &MarketConfig, seed: u64) -> Result<Population, MarketConfigError> {
        config.validate()?;
        let n = config.population_size;
        let mut rng = substream(seed, "market/population");
        let oc = &config.outcome;
        let rho = oc.organic_lift_anticorr;
        let rho_ortho = (1.0 - rho * rho).sqrt();

        let mut users = Vec::with_capacity(n);
        let mut outcomes = Vec::with_capacity(n);
        let mut value_signal = Vec::with_capacity(n);
        for user_id in 0..n {
            let v: f64 = rng.sample(StandardNormal); // organic factor
            let u: f64 = rng.sample(StandardNormal); // responsiveness factor
            let e_pcvr: f64 = rng.sample(StandardNormal);
            let e_dist: f64 = rng.sample(StandardNormal);

            let beta0 = oc.beta0_mean + oc.beta0_sd * v;
            let lift_factor = -rho * v + rho_ortho * u;
            let beta1 = softplus(oc.wearin_loc + oc.wearin_scale * lift_factor);
            let wearout_draw: f64 = rng.sample(StandardNormal);
            let beta2 = oc.wearout_min + (oc.wearout_sd * wearout_draw).abs();
            let params = OutcomeParams::new(beta0, beta1, beta2);

            // Observable features: noisy proxies of the latent factors. The
            // carried-over conversion-rate prediction tracks the organic level
            // (the existing bidder was good at finding frequent visitors, not
            // responsive ones); frequency is a realized organic visit count;
            // distance falls with both factors.
            let logged_pcvr = sigmoid(beta0 + 0.5 * e_pcvr);
            let freq_mean = 60.0 * sigmoid(beta0);
            let visit_frequency = sample_poisson(&mut rng, freq_mean);
            let distance_km = (1.0 - 0.3 * v - 0.4 * u + 0.5 * e_dist).exp();
            let prior_mean = 8.0 * logged_pcvr / 0.05;
            let prior_impressions = sample_poisson(&mut rng, prior_mean.min(200.0)) as u32;

            users.push(UserProfile {
                user_id: user_id as UserId,
                arm: Arm::Control, // replaced by the balanced assignment below
                features: Features {
                    visit_frequency,
                    distance_km,
                    prior_impressions,
                    logged_pcvr,
                },
            });
            outcomes.push(params);
            value_signal.push(logit(logged_pcvr));
        }

        // Balanced five-way arm split: shuffle, then deal round-robin.
        let mut order: Vec<usize> = (0..n).collect();
        let mut arm_rng = substream(seed, "market/arms");
        shuffle(&mut order, &mut arm_rng);
        for (pos, &idx) in order.iter().enumerate() {
            users[idx].arm = Arm::ALL[pos % Arm::COUNT];
        }

        // Standardize the value signal and scale it into a landscape shift.
        let mean = value_signal.iter().sum::<f64>() / n as f64;
        let var = value_signal.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt().max(1e-12);
        let strength = config.landscape.confounding * config.landscape.confounding_scale;
        let competitor_shift: Vec<f64> =
            value_signal.iter().map(|z| strength * (z - mean) / sd).collect();

        let mut slot_rng = substream(seed, "market/slots");
        let beta = rand_distr::Beta::new(config.slots.ctr_alpha, config.slots.ctr_beta)
            .expect("validated slot CTR shape parameters");
        let slot_ctr: Vec<f64> =
            (0..config.slots.count).map(|_| beta.sample(&mut slot_rng)).collect();

        Ok(Population {
            days: config.campaign_days,
            users,
            outcomes,
            competitor_shift,
            slot_ctr,
        })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Campaign length the lift oracles are expressed in (visit days).
    pub fn campaign_days(&self) -> u32 {
        self.days
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn user(&self, user_id: UserId) -> &UserProfile {
        &self.users[user_id as usize]
    }

    pub fn arm_users(&self, arm: Arm) -> impl Iterator<Item = &UserProfile> {
        self.users.iter().filter(move |u| u.arm == arm)
    }

    pub fn slot_count(&self) -> u16 {
        self.slot_ctr.len() as u16
    }

    /// True click-through rate of a slot.
    pub fn slot_ctr(&self, slot_id: u16) -> f64 {
        self.slot_ctr[slot_id as usize]
    }

    pub(crate) fn competitor_shift(&self, user_id: UserId) -> f64 {
        self.competitor_shift[user_id as usize]
    }

    // ------------------------------------------------------------------
    // Evaluation oracles (ground truth; not visible to bidding policies)
    // ------------------------------------------------------------------

    /// Ground-truth daily visit probability at exposure count `s`.
    pub fn true_visit_prob(&self, user_id: UserId, s: u32) -> f64 {
        self.outcomes[user_id as usize].daily_visit_prob(s)
    }

    /// Expected extra campaign visits caused by moving the user from `s − 1`
    /// to `s` exposures, held at that state all `campaign_days` days.
    pub fn true_lift(&self, user_id: UserId, s: u32) -> f64 {
        assert!(s >= 1, "lift is defined between consecutive states; got s = {s}");
        let p = &self.outcomes[user_id as usize];
        self.days as f64 * (p.daily_visit_prob(s) - p.daily_visit_prob(s - 1))
    }

    /// Ground-truth analog of the amortized per-impression lift a trained
    /// predictor reports for `bin`: expected campaign visits gained per
    /// impression between the bin's lower edge and the next bin's lower edge.
    /// Zero for the open last bin, where predictors also report zero.
    pub fn true_amortized_lift(&self, user_id: UserId, bin: ExposureBin) -> f64 {
        let Some(next) = bin.next() else { return 0.0 };
        let gap = f64::from(bin.gap_to_next().expect("non-last bin has a gap"));
        let p = &self.outcomes[user_id as usize];
        self.days as f64 * (p.daily_visit_prob(next.lower()) - p.daily_visit_prob(bin.lower()))
            / gap
    }

    /// Realize end-of-campaign visit labels for one user.
    ///
    /// `exposure_by_day[d]` is the exposure count in effect on day `d` (the
    /// cumulative wins through that day); a visit is counted at most once per
    /// day. One entry per simulated day — a phase may run shorter or longer
    /// than `campaign_days`. Control users pass an all-zero schedule; an
    /// empty schedule yields zero visits.
    pub fn realize_visits(
        &self,
        user_id: UserId,
        exposure_by_day: &[u32],
        rng: &mut impl Rng,
    ) -> VisitLabel {
        let params = &self.outcomes[user_id as usize];
        let mut y_obs = 0u32;
        for &s in exposure_by_day {
            let p = params.daily_visit_prob(s);
            if rng.random::<f64>() < p {
                y_obs += 1;
            }
        }
        VisitLabel {
            user_id,
            s_final: exposure_by_day.last().copied().unwrap_or(0),
            y_obs,
        }
    }

    /// Exposure bin of the user's final state under a schedule.
    pub fn final_bin(schedule: &[u32]) -> ExposureBin {
        exposure_bin(schedule.last().copied().unwrap_or(0))
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn sample_poisson(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    dist.sample(rng).min(10_000.0)
}

/// Fisher–Yates with our own index draws (keeps the shuffle stable across
/// `rand` upgrades, which matters for frozen-seed tests).
fn shuffle(order: &mut [usize], rng: &mut impl Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config(n: usize) -> MarketConfig {
        MarketConfig { population_size: n, ..MarketConfig::default() }
    }

    #[test]
    fn rejects_population_size_zero() {
        assert!(matches!(
            Population::generate(&small_config(0), 1),
            Err(MarketConfigError::EmptyPopulation)
        ));
    }

    #[test]
    fn five_users_land_in_near_equal_arms() {
        let pop = Population::generate(&small_config(5), 1).unwrap();
        for arm in Arm::ALL {
            let count = pop.arm_users(arm).count();
            assert!(count <= 2, "arm {arm} got {count} of 5 users");
        }
        let total: usize = Arm::ALL.iter().map(|&a| pop.arm_users(a).count()).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn same_config_and_seed_is_identical() {
        let a = Population::generate(&small_config(300), 9).unwrap();
        let b = Population::generate(&small_config(300), 9).unwrap();
        assert_eq!(a.users(), b.users());
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.competitor_shift, b.competitor_shift);
        assert_eq!(a.slot_ctr, b.slot_ctr);
    }

    #[test]
    fn desk_scale_split_is_balanced_within_one() {
        let pop = Population::generate(&small_config(50_000), 7).unwrap();
        for arm in Arm::ALL {
            let count = pop.arm_users(arm).count() as i64;
            assert!((count - 10_000).abs() <= 1, "arm {arm}: {count}");
        }
    }

    #[test]
    fn flat_outcome_params_mean_zero_lift() {
        let p = OutcomeParams::new(-1.2, 0.0, 0.0);
        for s in 0..40 {
            assert_relative_eq!(p.daily_visit_prob(s), sigmoid(-1.2));
        }
    }

    #[test]
    fn pure_wearin_is_strictly_increasing() {
        let p = OutcomeParams::new(-2.0, 1.0, 0.0);
        for s in 0..40 {
            assert!(p.daily_visit_prob(s + 1) > p.daily_visit_prob(s));
        }
    }

    #[test]
    fn closed_form_visit_prob_matches_direct_evaluation() {
        let p = OutcomeParams::new(-2.0, 1.0, 0.05);
        let direct =
            |s: f64| 1.0 / (1.0 + (-(-2.0 + 1.0 * (1.0 + s).ln() - 0.05 * s)).exp());
        assert_relative_eq!(p.daily_visit_prob(0), direct(0.0), max_relative = 1e-12);
        assert_relative_eq!(p.daily_visit_prob(3), direct(3.0), max_relative = 1e-12);
        let delta = p.daily_visit_prob(3) - p.daily_visit_prob(0);
        assert!(delta > 0.0);
    }

    #[test]
    fn lift_oracles_are_consistent() {
        let cfg = small_config(50);
        let pop = Population::generate(&cfg, 3).unwrap();
        let days = cfg.campaign_days as f64;
        // Per-impression lift at s sums to the bin-amortized value.
        let bin = exposure_bin(5); // {5–9}, gap 5 to the next bin
        for uid in 0..5u32 {
            let direct: f64 = (6..=10).map(|s| pop.true_lift(uid, s)).sum::<f64>() / 5.0;
            assert_relative_eq!(
                pop.true_amortized_lift(uid, bin),
                direct,
                max_relative = 1e-10
            );
            assert_eq!(pop.true_amortized_lift(uid, ExposureBin::LAST), 0.0);
            let manual = days * (pop.true_visit_prob(uid, 1) - pop.true_visit_prob(uid, 0));
            assert_relative_eq!(pop.true_lift(uid, 1), manual, max_relative = 1e-12);
        }
    }

    #[test]
    fn visit_realization_respects_degenerate_probabilities() {
        let pop = Population::generate(&small_config(4), 5).unwrap();
        let days = pop.campaign_days() as usize;
        let mut rng = substream(11, "test/visits");

        // Force p = 0 and p = 1 through handcrafted params.
        let mut patched = pop.clone();
        patched.outcomes[0] = OutcomeParams::new(-2000.0, 0.0, 0.0);
        patched.outcomes[1] = OutcomeParams::new(2000.0, 0.0, 0.0);
        let zero = patched.realize_visits(0, &vec![0; days], &mut rng);
        assert_eq!(zero.y_obs, 0);
        let one = patched.realize_visits(1, &vec![0; days], &mut rng);
        assert_eq!(one.y_obs, pop.campaign_days());
        assert!(zero.y_obs <= pop.campaign_days());
        assert_eq!(one.s_final, 0);
    }

    #[test]
    fn control_mean_visits_tracks_analytic_expectation() {
        // Mean over users of realized organic visits ≈ mean of p_i(0) · days.
        let cfg = small_config(20_000);
        let pop = Population::generate(&cfg, 17).unwrap();
        let days = cfg.campaign_days;
        let schedule = vec![0u32; days as usize];
        let mut rng = substream(17, "test/control-visits");
        let mut realized = 0.0;
        let mut expected = 0.0;
        for u in pop.users() {
            realized += f64::from(pop.realize_visits(u.user_id, &schedule, &mut rng).y_obs);
            expected += days as f64 * pop.true_visit_prob(u.user_id, 0);
        }
        let n = pop.len() as f64;
        let (realized, expected) = (realized / n, expected / n);
        assert!(
            (realized - expected).abs() < 0.01,
            "realized {realized} vs expected {expected}"
        );
    }

    #[test]
    fn features_are_non_negative_and_pcvr_is_a_probability() {
        let pop = Population::generate(&small_config(2_000), 23).unwrap();
        for u in pop.users() {
            assert!(u.features.visit_frequency >= 0.0);
            assert!(u.features.distance_km >= 0.0);
            assert!(u.features.logged_pcvr > 0.0 && u.features.logged_pcvr < 1.0);
        }
    }

    #[test]
    fn confounding_zero_removes_landscape_shift() {
        let mut cfg = small_config(500);
        cfg.landscape.confounding = 0.0;
        let pop = Population::generate(&cfg, 2).unwrap();
        assert!(pop.competitor_shift.iter().all(|&s| s == 0.0));
    }
}
