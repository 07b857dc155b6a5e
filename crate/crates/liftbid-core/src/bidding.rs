//! Per-request bidding: the shared click-through-rate model, the per-user
//! impression-count store, and the bid computation for every arm.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Arm, Features, Micros, UserId};
use crate::learning::{normalize_phi, predict_lift, LearnError, TrainMode};
use crate::ModelBundle;

// ---------------------------------------------------------------------------
// Click-through-rate model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SlotCounts {
    pub impressions: u64,
    pub clicks: u64,
}

/// Per-slot smoothed historical click-through rate with a Beta(a, b) prior:
/// `(clicks + a) / (impressions + a + b)`. Slots never seen fall back to the
/// prior mean. Shared by every bidding arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PctrModel {
    pub a: f64,
    pub b: f64,
    slots: Vec<SlotCounts>,
}

impl PctrModel {
    /// Uninformed model: every slot predicts the prior mean `a / (a + b)`.
    pub fn prior(a: f64, b: f64) -> PctrModel {
        assert!(a > 0.0 && b > 0.0, "Beta prior parameters must be positive");
        PctrModel { a, b, slots: Vec::new() }
    }

    /// Record one impression on a slot (and whether it was clicked).
    pub fn observe(&mut self, slot_id: u16, clicked: bool) {
        let idx = slot_id as usize;
        if idx >= self.slots.len() {
            self.slots.resize(idx + 1, SlotCounts::default());
        }
        self.slots[idx].impressions += 1;
        self.slots[idx].clicks += u64::from(clicked);
    }

    /// Build from logged impressions (won auctions only — losses show no ad
    /// and can produce no click).
    pub fn from_impressions<'a>(
        records: impl IntoIterator<Item = &'a crate::domain::ImpressionLog>,
        a: f64,
        b: f64,
    ) -> PctrModel {
        let mut model = PctrModel::prior(a, b);
        for rec in records {
            if rec.won {
                model.observe(rec.slot_id, rec.clicked);
            }
        }
        model
    }

    /// Smoothed click probability for a slot; always in (0, 1).
    pub fn predict(&self, slot_id: u16) -> f64 {
        let counts = self.slots.get(slot_id as usize).copied().unwrap_or_default();
        (counts.clicks as f64 + self.a) / (counts.impressions as f64 + self.a + self.b)
    }
}

// ---------------------------------------------------------------------------
// Impression-count store
// ---------------------------------------------------------------------------

/// Mutable per-arm state: how many impressions each user has received.
/// Counts only wins — the exposure state is the number of ads actually
/// shown, not the number of bids. Reads observe all prior writes in the
/// arm's event order.
#[derive(Debug, Clone, Default)]
pub struct ImpressionStore {
    counts: HashMap<UserId, u32>,
}

impl ImpressionStore {
    pub fn new() -> ImpressionStore {
        ImpressionStore::default()
    }

    pub fn count(&self, user_id: UserId) -> u32 {
        self.counts.get(&user_id).copied().unwrap_or(0)
    }

    /// Increment on a won auction; returns the updated count.
    pub fn record_win(&mut self, user_id: UserId) -> u32 {
        let c = self.counts.entry(user_id).or_insert(0);
        *c += 1;
        *c
    }
}

// ---------------------------------------------------------------------------
// Bidders
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum BidError {
    #[error("arm {arm} requires a bundle trained in {expected} mode, got {got}")]
    ModeMismatch { arm: Arm, expected: TrainMode, got: TrainMode },
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// One experiment arm's bidding strategy with its loaded models.
#[derive(Debug, Clone)]
pub enum BidderVariant<'a> {
    /// Performance bidder: bid ∝ normalized predicted conversion rate.
    Baseline { bundle: &'a ModelBundle, cpc: Micros },
    /// Lift bidder: bid ∝ normalized predicted lift of the next impression.
    Lift { arm: Arm, bundle: &'a ModelBundle, cpc: Micros },
    /// Never bids.
    Control,
}

/// Bundle training mode each lift arm must load.
pub fn required_mode(arm: Arm) -> Option<TrainMode> {
    match arm {
        Arm::Naive => Some(TrainMode::Erm),
        Arm::Unbiased => Some(TrainMode::IpsClipped),
        Arm::Noclip => Some(TrainMode::Ips),
        Arm::Baseline | Arm::Control => None,
    }
}

/// Everything `compute_bid` decided for one request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidDecision {
    /// Final price, floored at zero and capped at the click value.
    pub bid: Micros,
    /// Signed bid multiplier before the zero floor.
    pub phi: f64,
    /// Raw pooled conversion-rate prediction (logged for reconstruction).
    pub pcvr: f64,
    /// Click probability used.
    pub pctr: f64,
}

impl<'a> BidderVariant<'a> {
    /// Wire an arm to its bundle, checking the arm/mode pairing.
    pub fn new(arm: Arm, bundle: &'a ModelBundle, cpc: Micros) -> Result<Self, BidError> {
        match arm {
            Arm::Control => Ok(BidderVariant::Control),
            Arm::Baseline => Ok(BidderVariant::Baseline { bundle, cpc }),
            _ => {
                let expected = required_mode(arm).expect("lift arms have a required mode");
                if bundle.mode != expected {
                    return Err(BidError::ModeMismatch { arm, expected, got: bundle.mode });
                }
                Ok(BidderVariant::Lift { arm, bundle, cpc })
            }
        }
    }

    pub fn arm(&self) -> Arm {
        match self {
            BidderVariant::Baseline { .. } => Arm::Baseline,
            BidderVariant::Lift { arm, .. } => *arm,
            BidderVariant::Control => Arm::Control,
        }
    }

    /// The arm's bid multiplier for this user at this exposure count, plus
    /// the raw pooled conversion-rate prediction, with no request-level
    /// inputs — cacheable per (user, exposure bin). Control yields nothing.
    /// φ is signed; the zero floor applies at pricing time.
    pub fn phi_pcvr(
        &self,
        x: &Features,
        current_count: u32,
    ) -> Result<Option<(f64, f64)>, BidError> {
        let bundle = match self {
            BidderVariant::Control => return Ok(None),
            BidderVariant::Baseline { bundle, .. } => *bundle,
            BidderVariant::Lift { bundle, .. } => *bundle,
        };
        let xr = crate::learning::to_scalar_features::<f64>(x.to_array());
        let pcvr = bundle.pcvr.predict_raw(&xr);
        let phi = match self {
            BidderVariant::Baseline { .. } => bundle.pcvr.predict_normalized(&xr)?,
            BidderVariant::Lift { .. } => {
                let tau_hat = predict_lift(&bundle.outcome, &xr, current_count);
                normalize_phi(tau_hat, bundle.tau_bar)?
            }
            BidderVariant::Control => unreachable!(),
        };
        Ok(Some((phi, pcvr)))
    }

    pub fn cpc(&self) -> Option<Micros> {
        match self {
            BidderVariant::Control => None,
            BidderVariant::Baseline { cpc, .. } | BidderVariant::Lift { cpc, .. } => Some(*cpc),
        }
    }

    pub fn pctr(&self, slot_id: u16) -> Option<f64> {
        match self {
            BidderVariant::Control => None,
            BidderVariant::Baseline { bundle, .. } | BidderVariant::Lift { bundle, .. } => {
                Some(bundle.pctr.predict(slot_id))
            }
        }
    }

    /// Price one bid request: `bid = max(φ, 0) · CPC · pCTR · α`, capped at
    /// CPC (never pay more for an impression than a click is worth).
    /// Control emits no bid.
    pub fn compute_bid(
        &self,
        x: &Features,
        current_count: u32,
        slot_id: u16,
        alpha: f64,
    ) -> Result<Option<BidDecision>, BidError> {
        let Some((phi, pcvr)) = self.phi_pcvr(x, current_count)? else {
            return Ok(None);
        };
        let cpc = self.cpc().expect("non-control arms have a click price");
        let pctr = self.pctr(slot_id).expect("non-control arms have a click model");
        let bid = price_bid(cpc, phi, pctr, alpha);
        Ok(Some(BidDecision { bid, phi, pcvr, pctr }))
    }
}

/// The bid price formula shared by every bidding policy:
/// `max(φ, 0) · CPC · pCTR · α`, rounded to micros and capped at CPC.
pub fn price_bid(cpc: Micros, phi: f64, pctr: f64, alpha: f64) -> Micros {
    debug_assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
    let raw = phi.max(0.0) * cpc.as_f64() * pctr * alpha;
    Micros::from_f64_bid(raw).min(cpc)
}

/// The pre-training bidding policy that generates the logging campaign: bid
/// proportional to the logged conversion-rate feature, normalized by its
/// population mean so the multiplier averages one, with the slot-prior click
/// rate. Exposure therefore concentrates on high-conversion-rate users —
/// the selection pressure the counterfactual training pipeline must undo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggingPolicy {
    mean_pcvr: f64,
}

impl LoggingPolicy {
    /// `mean_pcvr` is the population mean of the logged conversion-rate
    /// feature; must be positive.
    pub fn new(mean_pcvr: f64) -> Result<LoggingPolicy, BidError> {
        if !mean_pcvr.is_finite() || mean_pcvr <= 0.0 {
            return Err(BidError::Learn(LearnError::DegenerateNormalizer(mean_pcvr)));
        }
        Ok(LoggingPolicy { mean_pcvr })
    }

    pub fn from_population(pcvrs: impl IntoIterator<Item = f64>) -> Result<LoggingPolicy, BidError> {
        let mut sum = crate::scalar::CompensatedSum::<f64>::default();
        let mut n = 0usize;
        for v in pcvrs {
            sum.add(v);
            n += 1;
        }
        if n == 0 {
            return Err(BidError::Learn(LearnError::DegenerateNormalizer(0.0)));
        }
        LoggingPolicy::new(sum.value() / n as f64)
    }

    /// Multiplier and raw conversion-rate signal for a user.
    pub fn phi_pcvr(&self, x: &Features) -> (f64, f64) {
        (x.logged_pcvr / self.mean_pcvr, x.logged_pcvr)
    }
}
