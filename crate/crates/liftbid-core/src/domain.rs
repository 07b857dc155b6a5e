//! Shared vocabulary types: money, exposure bins, arms, features, and the
//! log-record schema every other module reads or writes.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// User identifier, dense within one generated population.
pub type UserId = u32;

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

/// Fixed-point currency in micro-units (1_000_000 micros = 1 currency unit).
///
/// All auction prices, budgets, and spend totals are held as integers so that
/// summation order can never change a reported amount.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Micros(pub i64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    /// Round a floating-point micro amount to the nearest integer micro,
    /// clamping negatives to zero (bids and prices are non-negative).
    pub fn from_f64_bid(x: f64) -> Micros {
        if !x.is_finite() || x <= 0.0 {
            return Micros::ZERO;
        }
        Micros(x.round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn min(self, other: Micros) -> Micros {
        Micros(self.0.min(other.0))
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs.0;
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

impl SubAssign for Micros {
    fn sub_assign(&mut self, rhs: Micros) {
        self.0 -= rhs.0;
    }
}

impl Neg for Micros {
    type Output = Micros;
    fn neg(self) -> Micros {
        Micros(-self.0)
    }
}

impl Sum for Micros {
    fn sum<I: Iterator<Item = Micros>>(iter: I) -> Micros {
        Micros(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}µ", self.0)
    }
}

// ---------------------------------------------------------------------------
// Exposure bins
// ---------------------------------------------------------------------------

/// Lower edges of the eight exposure bins {0},{1},{2},{3},{4},{5–9},{10–19},{20+}.
const BIN_LOWER: [u32; 8] = [0, 1, 2, 3, 4, 5, 10, 20];

/// Grouped impression-count state of a user.
///
/// The eight bins are compiled-in: they anchor the whole training pipeline
/// (one outcome predictor per bin, one propensity class per bin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ExposureBin(u8);

impl ExposureBin {
    pub const COUNT: usize = 8;
    pub const LAST: ExposureBin = ExposureBin(7);

    /// Bin from its index; panics outside 0..=7.
    pub fn from_index(index: usize) -> ExposureBin {
        assert!(index < Self::COUNT, "bin index {index} out of range");
        ExposureBin(index as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Smallest impression count in the bin.
    pub fn lower(self) -> u32 {
        BIN_LOWER[self.index()]
    }

    /// Largest impression count in the bin; `None` for the open last bin.
    pub fn upper(self) -> Option<u32> {
        if self == Self::LAST {
            None
        } else {
            Some(BIN_LOWER[self.index() + 1] - 1)
        }
    }

    pub fn next(self) -> Option<ExposureBin> {
        if self == Self::LAST {
            None
        } else {
            Some(ExposureBin(self.0 + 1))
        }
    }

    /// Impressions between this bin's lower edge and the next bin's lower
    /// edge; `None` for the open last bin. Used to amortize cross-bin lift.
    pub fn gap_to_next(self) -> Option<u32> {
        self.next().map(|n| n.lower() - self.lower())
    }

    pub fn all() -> impl Iterator<Item = ExposureBin> {
        (0..Self::COUNT).map(ExposureBin::from_index)
    }
}

impl TryFrom<u8> for ExposureBin {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        if (v as usize) < Self::COUNT {
            Ok(ExposureBin(v))
        } else {
            Err(format!("exposure bin index {v} out of range 0..=7"))
        }
    }
}

impl From<ExposureBin> for u8 {
    fn from(b: ExposureBin) -> u8 {
        b.0
    }
}

impl fmt::Display for ExposureBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper() {
            Some(u) if u == self.lower() => write!(f, "{{{}}}", self.lower()),
            Some(u) => write!(f, "{{{}-{}}}", self.lower(), u),
            None => write!(f, "{{{}+}}", self.lower()),
        }
    }
}

/// Map an impression count to its exposure bin. Total and monotone.
pub fn exposure_bin(count: u32) -> ExposureBin {
    // partition_point returns the number of lower edges ≤ count.
    let idx = BIN_LOWER.partition_point(|&lo| lo <= count);
    ExposureBin((idx - 1) as u8)
}

// ---------------------------------------------------------------------------
// Arms and mechanisms
// ---------------------------------------------------------------------------

/// The five experiment arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Performance bidder: bid ∝ predicted conversion rate.
    Baseline,
    /// Lift bidder trained by plain empirical risk minimization.
    Naive,
    /// Lift bidder trained with clipped inverse-propensity weighting.
    Unbiased,
    /// Lift bidder trained with unclipped inverse-propensity weighting.
    Noclip,
    /// No ads delivered; supplies the organic-visit contrast.
    Control,
}

impl Arm {
    pub const COUNT: usize = 5;
    pub const ALL: [Arm; 5] = [Arm::Baseline, Arm::Naive, Arm::Unbiased, Arm::Noclip, Arm::Control];

    pub fn index(self) -> usize {
        match self {
            Arm::Baseline => 0,
            Arm::Naive => 1,
            Arm::Unbiased => 2,
            Arm::Noclip => 3,
            Arm::Control => 4,
        }
    }

    /// Directory / report label.
    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Naive => "naive",
            Arm::Unbiased => "unbiased",
            Arm::Noclip => "noclip",
            Arm::Control => "control",
        }
    }

    pub fn from_name(name: &str) -> Option<Arm> {
        Arm::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn bids(self) -> bool {
        self != Arm::Control
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Auction payment rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    FirstPrice,
    SecondPrice,
}

// ---------------------------------------------------------------------------
// Users and observations
// ---------------------------------------------------------------------------

/// Bidder-visible user features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    /// Past store-visit frequency (visits per period, ≥ 0).
    pub visit_frequency: f64,
    /// Distance from home to the nearest store, km (≥ 0).
    pub distance_km: f64,
    /// Impression count the user received in the prior period.
    pub prior_impressions: u32,
    /// Conversion-rate prediction carried over from the existing bidder.
    pub logged_pcvr: f64,
}

impl Features {
    pub const DIM: usize = 4;

    /// Dense vector view for the learners.
    pub fn to_array(&self) -> [f64; Self::DIM] {
        [
            self.visit_frequency,
            self.distance_km,
            self.prior_impressions as f64,
            self.logged_pcvr,
        ]
    }
}

/// The bidder-visible part of a generated user.
///
/// The ground-truth visit dynamics live in the simulator's population and are
/// not reachable from here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    pub arm: Arm,
    pub features: Features,
}

/// One bid request and its resolution; one JSONL line in
/// `<run_id>/<arm>/impressions.jsonl`.
///
/// Schema (field names are the wire format):
/// `user_id, day, hour, auction_id, arm, slot_id, features{visit_frequency,
/// distance_km, prior_impressions, logged_pcvr}, exposure_count_before,
/// bin_before, bid_micros, won, price_paid_micros, clearing_price_micros?,
/// mechanism, clicked, phi, pcvr`.
///
/// `clearing_price_micros` is present exactly on won second-price auctions.
/// `phi` is the bid multiplier the arm used (lift-based or normalized pCVR);
/// `pcvr` is the raw pooled conversion-rate prediction before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionLog {
    pub user_id: UserId,
    pub day: u32,
    pub hour: u8,
    pub auction_id: u64,
    pub arm: Arm,
    pub slot_id: u16,
    pub features: Features,
    pub exposure_count_before: u32,
    pub bin_before: ExposureBin,
    pub bid_micros: Micros,
    pub won: bool,
    pub price_paid_micros: Micros,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clearing_price_micros: Option<Micros>,
    pub mechanism: Mechanism,
    pub clicked: bool,
    pub phi: f64,
    pub pcvr: f64,
}

/// End-of-campaign outcome for one user; one CSV row in
/// `<run_id>/<arm>/labels.csv` with columns `user_id,s_final,y_obs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitLabel {
    pub user_id: UserId,
    /// Final exposure count at campaign end.
    pub s_final: u32,
    /// Visit days over the campaign (each day counted up to one).
    pub y_obs: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bin_edges_match_the_eight_classes() {
        let lowers: Vec<u32> = ExposureBin::all().map(|b| b.lower()).collect();
        assert_eq!(lowers, vec![0, 1, 2, 3, 4, 5, 10, 20]);
        let uppers: Vec<Option<u32>> = ExposureBin::all().map(|b| b.upper()).collect();
        assert_eq!(
            uppers,
            vec![Some(0), Some(1), Some(2), Some(3), Some(4), Some(9), Some(19), None]
        );
    }

    #[test]
    fn bin_mapping_examples() {
        assert_eq!(exposure_bin(0).index(), 0);
        assert_eq!(exposure_bin(7).index(), 5);
        assert_eq!(exposure_bin(20).index(), 7);
        assert_eq!(exposure_bin(10_000).index(), 7);
    }

    #[test]
    fn every_small_count_maps_to_exactly_one_bin() {
        for c in 0u32..=30 {
            let hits: Vec<_> = ExposureBin::all()
                .filter(|b| c >= b.lower() && b.upper().is_none_or(|u| c <= u))
                .collect();
            assert_eq!(hits.len(), 1, "count {c} hit {hits:?}");
            assert_eq!(hits[0], exposure_bin(c));
        }
    }

    #[test]
    fn gaps_between_consecutive_lower_edges() {
        let gaps: Vec<u32> = ExposureBin::all().filter_map(|b| b.gap_to_next()).collect();
        assert_eq!(gaps, vec![1, 1, 1, 1, 1, 5, 10]);
        assert_eq!(ExposureBin::LAST.gap_to_next(), None);
    }

    #[test]
    fn bin_serde_is_the_index_and_rejects_out_of_range() {
        let b = exposure_bin(12);
        assert_eq!(serde_json::to_string(&b).unwrap(), "6");
        assert_eq!(serde_json::from_str::<ExposureBin>("6").unwrap(), b);
        assert!(serde_json::from_str::<ExposureBin>("8").is_err());
    }

    #[test]
    fn arm_names_round_trip() {
        for arm in Arm::ALL {
            assert_eq!(Arm::from_name(arm.name()), Some(arm));
        }
        assert_eq!(serde_json::to_string(&Arm::Unbiased).unwrap(), "\"unbiased\"");
    }

    #[test]
    fn micros_bid_rounding_clamps_negatives() {
        assert_eq!(Micros::from_f64_bid(-3.0), Micros::ZERO);
        assert_eq!(Micros::from_f64_bid(f64::NAN), Micros::ZERO);
        assert_eq!(Micros::from_f64_bid(2.5), Micros(3));
        assert_eq!(Micros::from_f64_bid(2.4), Micros(2));
    }

    #[test]
    fn impression_log_clearing_price_field_is_conditional() {
        let mut rec = ImpressionLog {
            user_id: 1,
            day: 0,
            hour: 13,
            auction_id: 42,
            arm: Arm::Unbiased,
            slot_id: 3,
            features: Features {
                visit_frequency: 1.5,
                distance_km: 2.0,
                prior_impressions: 4,
                logged_pcvr: 0.02,
            },
            exposure_count_before: 5,
            bin_before: exposure_bin(5),
            bid_micros: Micros(1200),
            won: true,
            price_paid_micros: Micros(900),
            clearing_price_micros: Some(Micros(900)),
            mechanism: Mechanism::SecondPrice,
            clicked: false,
            phi: 1.3,
            pcvr: 0.02,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains("\"clearing_price_micros\":900"));
        let back: ImpressionLog = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);

        rec.won = false;
        rec.price_paid_micros = Micros::ZERO;
        rec.clearing_price_micros = None;
        let line = serde_json::to_string(&rec).unwrap();
        assert!(!line.contains("clearing_price_micros"));
        let back: ImpressionLog = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }

    proptest! {
        #[test]
        fn bin_contains_its_count_and_is_monotone(c in 0u32..1_000_000) {
            let b = exposure_bin(c);
            prop_assert!(b.lower() <= c);
            if let Some(u) = b.upper() {
                prop_assert!(c <= u);
            }
            prop_assert!(exposure_bin(c + 1) >= b);
        }
    }
}
