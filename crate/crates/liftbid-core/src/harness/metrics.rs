//! The per-arm metric suite: click-through rates, visit means and lifts,
//! cost-per-incremental-action, inventory-cost shares, win rates, and the
//! second-price bid-minus-clearing gap — each with a standard error where a
//! per-unit sample exists, plus normalized columns. Undefined values (zero
//! denominators, absent samples) are reported as nulls, never as zeros.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Arm, Micros, UserId};
use crate::harness::engine::ArmRun;
use crate::scalar::CompensatedSum;

/// One reported number: the raw value, its standard error when a per-unit
/// sample backs it, and the normalized column (per-metric convention: either
/// divided by the baseline arm or by the across-arm average).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Metric {
    pub value: Option<f64>,
    pub se: Option<f64>,
    pub normalized: Option<f64>,
}

impl Metric {
    fn none() -> Metric {
        Metric::default()
    }

    fn from_value(value: Option<f64>) -> Metric {
        Metric { value, se: None, normalized: None }
    }

    fn from_sample(sample: MeanSe) -> Metric {
        Metric { value: sample.mean, se: sample.se, normalized: None }
    }
}

/// Everything reported for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub arm: Arm,
    pub users: u64,
    pub bid_requests: u64,
    pub impressions: u64,
    pub clicks: u64,
    pub spend_micros: Micros,
    /// CPC × clicks: what the advertiser pays the platform.
    pub cpc_charge_micros: Micros,
    /// Clicks / impressions (auction level).
    pub mean_ctr: Metric,
    /// Mean over users with ≥1 impression of that user's clicks/impressions.
    pub per_user_ctr: Metric,
    /// Mean observed visits per user.
    pub mean_visits: Metric,
    /// Mean visits minus the control arm's mean visits.
    pub visit_lift: Metric,
    /// CPC charge / (visit lift × users): cost per incremental visit.
    /// Negative when the arm's visit lift is negative.
    pub cpia_micros: Metric,
    /// Inventory spend / CPC charge.
    pub pct_inventory_cost: Metric,
    /// Inventory spend / impressions.
    pub avg_inventory_cost_micros: Metric,
    /// Impressions / bid requests.
    pub win_rate: Metric,
    /// Mean (bid − clearing price) over won second-price auctions.
    pub price_diff_micros: Metric,
}

/// The full A/B metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cpc_micros: Micros,
    /// One entry per arm present in the run, in canonical arm order.
    pub arms: Vec<ArmMetrics>,
}

impl MetricsReport {
    pub fn arm(&self, arm: Arm) -> Option<&ArmMetrics> {
        self.arms.iter().find(|m| m.arm == arm)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct MeanSe {
    mean: Option<f64>,
    se: Option<f64>,
}

/// Mean and standard error (sample SD / √n) of a sample; mean needs n ≥ 1,
/// the standard error needs n ≥ 2. Deterministic: compensated sums over the
/// caller's fixed iteration order.
fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe::default();
    }
    let mut sum = CompensatedSum::<f64>::new();
    for &v in values {
        sum.add(v);
    }
    let mean = sum.value() / n as f64;
    if n < 2 {
        return MeanSe { mean: Some(mean), se: None };
    }
    let mut sq = CompensatedSum::<f64>::new();
    for &v in values {
        let d = v - mean;
        sq.add(d * d);
    }
    let var = sq.value() / (n - 1) as f64;
    MeanSe { mean: Some(mean), se: Some((var / n as f64).sqrt()) }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Compute the metric table from completed arm runs. The control arm's
/// mean visits anchors every visit-lift entry; without a control run all
/// lifts (and CPIAs) are null. Count metrics for the control arm are null
/// by construction (it never bids).
pub fn compute_metrics(runs: &[ArmRun], cpc: Micros) -> MetricsReport {
    let control_visits: MeanSe = runs
        .iter()
        .find(|r| r.arm == Arm::Control)
        .map(|r| mean_se(&visit_sample(r)))
        .unwrap_or_default();

    let mut arms: Vec<ArmMetrics> = runs.iter().map(|r| arm_metrics(r, cpc, control_visits)).collect();
    arms.sort_by_key(|m| m.arm.index());

    // Normalization pass. Convention per metric:
    //  - divided by the baseline arm: CTRs, visits, lift, CPIA, % inventory;
    //  - divided by the across-arm average of defined values: average
    //    inventory cost, win rate, price diff.
    let by_baseline: [MetricField; 6] = [
        (|m| m.mean_ctr, |m| &mut m.mean_ctr),
        (|m| m.per_user_ctr, |m| &mut m.per_user_ctr),
        (|m| m.mean_visits, |m| &mut m.mean_visits),
        (|m| m.visit_lift, |m| &mut m.visit_lift),
        (|m| m.cpia_micros, |m| &mut m.cpia_micros),
        (|m| m.pct_inventory_cost, |m| &mut m.pct_inventory_cost),
    ];
    for (get, get_mut) in by_baseline {
        let anchor = baseline_anchor(&arms, get);
        for m in &mut arms {
            let value = get(m).value;
            get_mut(m).normalized = match (value, anchor) {
                (Some(v), Some(a)) => ratio(v, a),
                _ => None,
            };
        }
    }
    let by_average: [MetricField; 3] = [
        (|m| m.avg_inventory_cost_micros, |m| &mut m.avg_inventory_cost_micros),
        (|m| m.win_rate, |m| &mut m.win_rate),
        (|m| m.price_diff_micros, |m| &mut m.price_diff_micros),
    ];
    for (get, get_mut) in by_average {
        let anchor = average_anchor(&arms, get);
        for m in &mut arms {
            let value = get(m).value;
            get_mut(m).normalized = match (value, anchor) {
                (Some(v), Some(a)) => ratio(v, a),
                _ => None,
            };
        }
    }

    MetricsReport { cpc_micros: cpc, arms }
}

/// Read and write accessors for one [`Metric`] field of [`ArmMetrics`].
type MetricField = (fn(&ArmMetrics) -> Metric, fn(&mut ArmMetrics) -> &mut Metric);

/// The baseline arm's value for one metric, for ratio normalization.
fn baseline_anchor(arms: &[ArmMetrics], get: fn(&ArmMetrics) -> Metric) -> Option<f64> {
    arms.iter().find(|m| m.arm == Arm::Baseline).and_then(|m| get(m).value)
}

/// The across-arm mean of defined values for one metric.
fn average_anchor(arms: &[ArmMetrics], get: fn(&ArmMetrics) -> Metric) -> Option<f64> {
    let defined: Vec<f64> = arms.iter().filter_map(|m| get(m).value).collect();
    mean_se(&defined).mean
}

fn visit_sample(run: &ArmRun) -> Vec<f64> {
    run.labels.iter().map(|l| f64::from(l.y_obs)).collect()
}

fn arm_metrics(run: &ArmRun, cpc: Micros, control_visits: MeanSe) -> ArmMetrics {
    let arm = run.arm;
    let users = run.labels.len() as u64;
    let bid_requests = run.impressions.len() as u64;
    let won: Vec<_> = run.impressions.iter().filter(|r| r.won).collect();
    let impressions = won.len() as u64;
    let clicks = won.iter().filter(|r| r.clicked).count() as u64;
    let spend: Micros = run.impressions.iter().map(|r| r.price_paid_micros).sum();
    let cpc_charge = Micros(cpc.0 * clicks as i64);

    // Auction-level samples.
    let click_sample: Vec<f64> = won.iter().map(|r| f64::from(u8::from(r.clicked))).collect();
    let win_sample: Vec<f64> =
        run.impressions.iter().map(|r| f64::from(u8::from(r.won))).collect();
    let price_sample: Vec<f64> = won.iter().map(|r| r.price_paid_micros.as_f64()).collect();
    let diff_sample: Vec<f64> = won
        .iter()
        .filter_map(|r| {
            r.clearing_price_micros.map(|clearing| (r.bid_micros - clearing).as_f64())
        })
        .collect();

    // User-level samples, iterated in label order for determinism.
    let mut per_user: HashMap<UserId, (u64, u64)> = HashMap::new();
    for r in &won {
        let e = per_user.entry(r.user_id).or_insert((0, 0));
        e.0 += 1;
        e.1 += u64::from(r.clicked);
    }
    let user_ctr_sample: Vec<f64> = run
        .labels
        .iter()
        .filter_map(|l| per_user.get(&l.user_id))
        .map(|&(imps, clks)| clks as f64 / imps as f64)
        .collect();

    let visits = mean_se(&visit_sample(run));
    let visit_lift = if arm == Arm::Control {
        Metric { value: control_visits.mean.map(|_| 0.0), se: None, normalized: None }
    } else {
        match (visits.mean, control_visits.mean) {
            (Some(v), Some(c)) => Metric {
                value: Some(v - c),
                se: match (visits.se, control_visits.se) {
                    (Some(a), Some(b)) => Some((a * a + b * b).sqrt()),
                    _ => None,
                },
                normalized: None,
            },
            _ => Metric::none(),
        }
    };

    let cpia = visit_lift
        .value
        .and_then(|lift| ratio(cpc_charge.as_f64(), lift * users as f64));

    // The control arm never bids: every auction/cost metric is null.
    let bids = arm != Arm::Control;

    ArmMetrics {
        arm,
        users,
        bid_requests,
        impressions,
        clicks,
        spend_micros: spend,
        cpc_charge_micros: cpc_charge,
        mean_ctr: if bids { Metric::from_sample(mean_se(&click_sample)) } else { Metric::none() },
        per_user_ctr: if bids {
            Metric::from_sample(mean_se(&user_ctr_sample))
        } else {
            Metric::none()
        },
        mean_visits: Metric::from_sample(visits),
        visit_lift,
        cpia_micros: if bids { Metric::from_value(cpia) } else { Metric::none() },
        pct_inventory_cost: if bids {
            Metric::from_value(ratio(spend.as_f64(), cpc_charge.as_f64()))
        } else {
            Metric::none()
        },
        avg_inventory_cost_micros: if bids {
            let m = mean_se(&price_sample);
            Metric { value: m.mean, se: m.se, normalized: None }
        } else {
            Metric::none()
        },
        win_rate: if bids { Metric::from_sample(mean_se(&win_sample)) } else { Metric::none() },
        price_diff_micros: if bids {
            Metric::from_sample(mean_se(&diff_sample))
        } else {
            Metric::none()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{exposure_bin, Features, ImpressionLog, Mechanism, VisitLabel};
    use approx::assert_relative_eq;

    fn features() -> Features {
        Features { visit_frequency: 1.0, distance_km: 2.0, prior_impressions: 0, logged_pcvr: 0.05 }
    }

    fn row(arm: Arm, user: u32, won: bool, clicked: bool) -> ImpressionLog {
        ImpressionLog {
            user_id: user,
            day: 0,
            hour: 0,
            auction_id: 1,
            arm,
            slot_id: 0,
            features: features(),
            exposure_count_before: 0,
            bin_before: exposure_bin(0),
            phi: 1.0,
            pcvr: 0.05,
            bid_micros: Micros(1_000),
            won,
            price_paid_micros: if won { Micros(700) } else { Micros::ZERO },
            clearing_price_micros: None,
            mechanism: Mechanism::FirstPrice,
            clicked,
        }
    }

    fn second_price_row(arm: Arm, bid: i64, clearing: i64) -> ImpressionLog {
        let mut r = row(arm, 1, true, false);
        r.bid_micros = Micros(bid);
        r.price_paid_micros = Micros(clearing);
        r.clearing_price_micros = Some(Micros(clearing));
        r.mechanism = Mechanism::SecondPrice;
        r
    }

    fn arm_run(arm: Arm, impressions: Vec<ImpressionLog>, labels: Vec<VisitLabel>) -> ArmRun {
        let final_spend = impressions.iter().map(|r| r.price_paid_micros).sum();
        ArmRun { arm, impressions, labels, pacing: Vec::new(), final_spend, final_alpha: 0.1 }
    }

    fn labels_with_mean(n: u32, visits_per_user: &[u32]) -> Vec<VisitLabel> {
        (0..n)
            .map(|u| VisitLabel {
                user_id: u,
                s_final: 0,
                y_obs: visits_per_user[u as usize % visits_per_user.len()],
            })
            .collect()
    }

    #[test]
    fn ctr_is_clicks_over_impressions() {
        // 10 impressions, 2 clicks → CTR 0.2.
        let rows: Vec<_> = (0..10).map(|i| row(Arm::Baseline, i, true, i < 2)).collect();
        let run = arm_run(Arm::Baseline, rows, labels_with_mean(10, &[0]));
        let report = compute_metrics(&[run], Micros(1_000_000));
        let m = report.arm(Arm::Baseline).unwrap();
        assert_eq!(m.impressions, 10);
        assert_eq!(m.clicks, 2);
        assert_relative_eq!(m.mean_ctr.value.unwrap(), 0.2);
        // Zero impressions → CTR is null, never zero.
        let empty = arm_run(Arm::Naive, vec![], labels_with_mean(5, &[0]));
        let report = compute_metrics(&[empty], Micros(1_000_000));
        assert_eq!(report.arm(Arm::Naive).unwrap().mean_ctr.value, None);
    }

    #[test]
    fn cpia_definition_arithmetic() {
        // Arm mean visits 0.05, control 0.03, 1000 users each, 4 clicks at
        // CPC 1_000_000 → charge 4_000_000; lift 0.02 → 20 incremental
        // visits → CPIA 200_000.
        let mut arm_labels = labels_with_mean(1_000, &[0]);
        for l in arm_labels.iter_mut().take(50) {
            l.y_obs = 1;
        }
        let mut control_labels = labels_with_mean(1_000, &[0]);
        for l in control_labels.iter_mut().take(30) {
            l.y_obs = 1;
        }
        let rows: Vec<_> = (0..4).map(|i| row(Arm::Unbiased, i, true, true)).collect();
        let runs = vec![
            arm_run(Arm::Unbiased, rows, arm_labels),
            arm_run(Arm::Control, vec![], control_labels),
        ];
        let report = compute_metrics(&runs, Micros(1_000_000));
        let m = report.arm(Arm::Unbiased).unwrap();
        assert_relative_eq!(m.visit_lift.value.unwrap(), 0.02, max_relative = 1e-12);
        assert_eq!(m.cpc_charge_micros, Micros(4_000_000));
        assert_relative_eq!(m.cpia_micros.value.unwrap(), 200_000.0, max_relative = 1e-12);
        // Control's cost metrics are null; its lift is zero by definition.
        let c = report.arm(Arm::Control).unwrap();
        assert_eq!(c.mean_ctr.value, None);
        assert_eq!(c.cpia_micros.value, None);
        assert_eq!(c.visit_lift.value, Some(0.0));
    }

    #[test]
    fn price_diff_counts_only_second_price_wins() {
        // {(bid 5, clearing 3), (bid 4, clearing 4)} → mean diff 1.0.
        let rows = vec![
            second_price_row(Arm::Baseline, 5, 3),
            second_price_row(Arm::Baseline, 4, 4),
            row(Arm::Baseline, 2, true, false), // first-price win: not counted
            row(Arm::Baseline, 3, false, false),
        ];
        let run = arm_run(Arm::Baseline, rows, labels_with_mean(4, &[0]));
        let report = compute_metrics(&[run], Micros(1_000_000));
        let m = report.arm(Arm::Baseline).unwrap();
        assert_relative_eq!(m.price_diff_micros.value.unwrap(), 1.0);
        assert_relative_eq!(m.win_rate.value.unwrap(), 0.75);
    }

    #[test]
    fn normalized_baseline_is_exactly_one_and_average_convention_applies() {
        let baseline_rows: Vec<_> = (0..8).map(|i| row(Arm::Baseline, i, i < 4, i < 2)).collect();
        let naive_rows: Vec<_> = (0..8).map(|i| row(Arm::Naive, i, i < 2, i < 1)).collect();
        let runs = vec![
            arm_run(Arm::Baseline, baseline_rows, labels_with_mean(8, &[0, 1])),
            arm_run(Arm::Naive, naive_rows, labels_with_mean(8, &[0, 1, 1])),
            arm_run(Arm::Control, vec![], labels_with_mean(8, &[0, 1, 0])),
        ];
        let report = compute_metrics(&runs, Micros(1_000_000));
        let b = report.arm(Arm::Baseline).unwrap();
        assert_eq!(b.mean_ctr.normalized, Some(1.0));
        assert_eq!(b.mean_visits.normalized, Some(1.0));
        assert_eq!(b.pct_inventory_cost.normalized, Some(1.0));
        assert_eq!(b.visit_lift.normalized, Some(1.0));
        // Average-normalized: win rates 0.5 and 0.25 → average 0.375.
        let n = report.arm(Arm::Naive).unwrap();
        assert_relative_eq!(b.win_rate.normalized.unwrap(), 0.5 / 0.375);
        assert_relative_eq!(n.win_rate.normalized.unwrap(), 0.25 / 0.375);
        // Control's normalized visits follow the baseline convention.
        let c = report.arm(Arm::Control).unwrap();
        assert!(c.mean_visits.normalized.is_some());
        assert_eq!(c.win_rate.normalized, None);
    }

    #[test]
    fn standard_errors_use_sample_sd_over_sqrt_n() {
        let labels = vec![
            VisitLabel { user_id: 0, s_final: 0, y_obs: 0 },
            VisitLabel { user_id: 1, s_final: 0, y_obs: 1 },
            VisitLabel { user_id: 2, s_final: 0, y_obs: 2 },
        ];
        let run = arm_run(Arm::Baseline, vec![], labels);
        let report = compute_metrics(&[run], Micros(1_000_000));
        let m = report.arm(Arm::Baseline).unwrap();
        assert_relative_eq!(m.mean_visits.value.unwrap(), 1.0);
        // Sample SD of {0,1,2} = 1 → SE = 1/√3.
        assert_relative_eq!(m.mean_visits.se.unwrap(), 1.0 / 3f64.sqrt(), max_relative = 1e-12);
        // A single observation has a mean but no SE.
        let run = arm_run(Arm::Naive, vec![], labels_with_mean(1, &[2]));
        let report = compute_metrics(&[run], Micros(1_000_000));
        let m = report.arm(Arm::Naive).unwrap();
        assert_eq!(m.mean_visits.value, Some(2.0));
        assert_eq!(m.mean_visits.se, None);
    }

    #[test]
    fn per_user_ctr_averages_over_exposed_users_only() {
        let rows = vec![
            row(Arm::Baseline, 0, true, true),
            row(Arm::Baseline, 0, true, false),
            row(Arm::Baseline, 1, true, false),
            row(Arm::Baseline, 2, false, false),
        ];
        let run = arm_run(Arm::Baseline, rows, labels_with_mean(3, &[0]));
        let report = compute_metrics(&[run], Micros(1_000_000));
        let m = report.arm(Arm::Baseline).unwrap();
        // Users 0 (ctr 0.5) and 1 (ctr 0.0); user 2 saw no ad.
        assert_relative_eq!(m.per_user_ctr.value.unwrap(), 0.25);
    }

    #[test]
    fn empty_input_yields_empty_report() {
        let report = compute_metrics(&[], Micros(1_000_000));
        assert!(report.arms.is_empty());
    }

    #[test]
    fn json_round_trips_exactly() {
        let rows = vec![second_price_row(Arm::Baseline, 9, 7), row(Arm::Baseline, 1, true, true)];
        let runs = vec![
            arm_run(Arm::Baseline, rows, labels_with_mean(6, &[0, 2])),
            arm_run(Arm::Control, vec![], labels_with_mean(6, &[1, 0])),
        ];
        let report = compute_metrics(&runs, Micros(123_456));
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
