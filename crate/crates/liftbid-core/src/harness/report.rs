//! Report emission: the metric table as CSV (long format) and JSON, the α
//! trajectory, and the per-arm histogram of user visits binned by the
//! multiplier φ. All writers produce deterministic bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Arm, UserId};
use crate::harness::engine::{ArmRun, PacingRow};
use crate::harness::metrics::{ArmMetrics, Metric, MetricsReport};
use crate::logio::LogIoError;
use crate::scalar::CompensatedSum;

/// φ-bin edges for the visits-by-multiplier histogram: `[0, 0.5)`,
/// `[0.5, 1.5)`, …, `[4.5, 5.5)`, and a closed last bin `[5.5, 6.5]`.
pub const PHI_BIN_EDGES: [(f64, f64); 7] = [
    (0.0, 0.5),
    (0.5, 1.5),
    (1.5, 2.5),
    (2.5, 3.5),
    (3.5, 4.5),
    (4.5, 5.5),
    (5.5, 6.5),
];

/// Index of the φ bin a value falls in; `None` outside the covered range.
pub fn phi_bin(phi: f64) -> Option<usize> {
    if !phi.is_finite() || phi < 0.0 {
        return None;
    }
    for (i, &(lo, hi)) in PHI_BIN_EDGES.iter().enumerate() {
        let last = i == PHI_BIN_EDGES.len() - 1;
        if phi >= lo && (phi < hi || (last && phi <= hi)) {
            return Some(i);
        }
    }
    None
}

/// One histogram cell: users of one arm whose mean served multiplier fell in
/// one φ bin, with their mean observed visits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiBinRow {
    pub arm: Arm,
    pub bin: usize,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub users: u64,
    pub mean_visits: Option<f64>,
    pub se: Option<f64>,
}

/// Bin each bidding arm's users by their mean served multiplier (each
/// request's φ floored at zero, as priced) and average the observed visits
/// per bin. Control has no served φ and is skipped.
pub fn phi_bin_rows(runs: &[ArmRun]) -> Vec<PhiBinRow> {
    let mut rows = Vec::new();
    for run in runs {
        if run.arm == Arm::Control {
            continue;
        }
        let mut phi_by_user: HashMap<UserId, (CompensatedSum<f64>, u64)> = HashMap::new();
        for rec in &run.impressions {
            let e = phi_by_user.entry(rec.user_id).or_default();
            e.0.add(rec.phi.max(0.0));
            e.1 += 1;
        }
        // Per-bin visit samples, accumulated in label order for determinism.
        let mut samples: [Vec<f64>; 7] = Default::default();
        for label in &run.labels {
            let Some(&(sum, n)) = phi_by_user.get(&label.user_id) else { continue };
            let mean_phi = sum.value() / n as f64;
            let Some(b) = phi_bin(mean_phi) else { continue };
            samples[b].push(f64::from(label.y_obs));
        }
        for (b, &(lo, hi)) in PHI_BIN_EDGES.iter().enumerate() {
            let sample = &samples[b];
            let n = sample.len() as u64;
            let (mean, se) = summarize(sample);
            rows.push(PhiBinRow {
                arm: run.arm,
                bin: b,
                phi_lo: lo,
                phi_hi: hi,
                users: n,
                mean_visits: mean,
                se,
            });
        }
    }
    rows
}

fn summarize(sample: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = sample.len();
    if n == 0 {
        return (None, None);
    }
    let mut sum = CompensatedSum::<f64>::new();
    for &v in sample {
        sum.add(v);
    }
    let mean = sum.value() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let mut sq = CompensatedSum::<f64>::new();
    for &v in sample {
        sq.add((v - mean) * (v - mean));
    }
    let se = (sq.value() / ((n - 1) as f64) / n as f64).sqrt();
    (Some(mean), Some(se))
}

/// One long-format CSV row of the report: `arm,metric,value,se,normalized`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub arm: Arm,
    pub metric: String,
    pub value: Option<f64>,
    pub se: Option<f64>,
    pub normalized: Option<f64>,
}

fn metric_rows(m: &ArmMetrics) -> Vec<ReportRow> {
    let count = |name: &str, v: f64| ReportRow {
        arm: m.arm,
        metric: name.to_string(),
        value: Some(v),
        se: None,
        normalized: None,
    };
    let metric = |name: &str, v: Metric| ReportRow {
        arm: m.arm,
        metric: name.to_string(),
        value: v.value,
        se: v.se,
        normalized: v.normalized,
    };
    vec![
        count("users", m.users as f64),
        count("bid_requests", m.bid_requests as f64),
        count("impressions", m.impressions as f64),
        count("clicks", m.clicks as f64),
        count("spend_micros", m.spend_micros.as_f64()),
        count("cpc_charge_micros", m.cpc_charge_micros.as_f64()),
        metric("mean_ctr", m.mean_ctr),
        metric("per_user_ctr", m.per_user_ctr),
        metric("mean_visits", m.mean_visits),
        metric("visit_lift", m.visit_lift),
        metric("cpia_micros", m.cpia_micros),
        metric("pct_inventory_cost", m.pct_inventory_cost),
        metric("avg_inventory_cost_micros", m.avg_inventory_cost_micros),
        metric("win_rate", m.win_rate),
        metric("price_diff_micros", m.price_diff_micros),
    ]
}

fn csv_err(path: &Path, source: csv::Error) -> LogIoError {
    LogIoError::Csv { path: path.display().to_string(), source }
}

fn io_err(path: &Path, source: std::io::Error) -> LogIoError {
    LogIoError::Io { path: path.display().to_string(), source }
}

/// `report.csv`: one row per arm × metric; header only when empty.
pub fn write_report_csv(path: &Path, report: &MetricsReport) -> Result<(), LogIoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    if report.arms.is_empty() {
        // serde-driven headers need at least one record; write them by hand.
        out.write_record(["arm", "metric", "value", "se", "normalized"])
            .map_err(|e| csv_err(path, e))?;
    }
    for arm in &report.arms {
        for row in metric_rows(arm) {
            out.serialize(row).map_err(|e| csv_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// `report.json`: the full structured report, pretty-printed, newline-
/// terminated, byte-stable.
pub fn write_report_json(path: &Path, report: &MetricsReport) -> Result<(), LogIoError> {
    let mut text = serde_json::to_string_pretty(report).expect("report always serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_report_json(path: &Path) -> Result<MetricsReport, LogIoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|source| LogIoError::Json {
        path: path.display().to_string(),
        line: 1,
        source,
    })
}

/// `pacing.csv`: the α trajectory, one row per (arm, tick).
pub fn write_pacing_csv(path: &Path, rows: &[PacingRow]) -> Result<(), LogIoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    if rows.is_empty() {
        out.write_record(["hour", "arm", "alpha", "window_spend_micros"])
            .map_err(|e| csv_err(path, e))?;
    }
    for row in rows {
        out.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// `fig3_bins.csv`: the visits-by-φ histogram data.
pub fn write_phi_bins_csv(path: &Path, rows: &[PhiBinRow]) -> Result<(), LogIoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    if rows.is_empty() {
        out.write_record(["arm", "bin", "phi_lo", "phi_hi", "users", "mean_visits", "se"])
            .map_err(|e| csv_err(path, e))?;
    }
    for row in rows {
        out.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Write every report artifact into `dir`:
/// `report.csv`, `report.json`, `pacing.csv`, `fig3_bins.csv`.
pub fn write_run_reports(
    dir: &Path,
    report: &MetricsReport,
    pacing: &[PacingRow],
    phi_bins: &[PhiBinRow],
) -> Result<(), LogIoError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_report_csv(&dir.join("report.csv"), report)?;
    write_report_json(&dir.join("report.json"), report)?;
    write_pacing_csv(&dir.join("pacing.csv"), pacing)?;
    write_phi_bins_csv(&dir.join("fig3_bins.csv"), phi_bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{exposure_bin, Features, ImpressionLog, Mechanism, Micros, VisitLabel};
    use crate::harness::metrics::compute_metrics;
    use approx::assert_relative_eq;

    #[test]
    fn phi_bin_edges_match_documented_examples() {
        assert_eq!(phi_bin(0.4), Some(0));
        assert_eq!(phi_bin(1.5), Some(2));
        assert_eq!(phi_bin(0.0), Some(0));
        assert_eq!(phi_bin(0.5), Some(1));
        assert_eq!(phi_bin(6.5), Some(6)); // closed last bin
        assert_eq!(phi_bin(6.500001), None);
        assert_eq!(phi_bin(-0.1), None);
        assert_eq!(phi_bin(f64::NAN), None);
    }

    fn run_with_phis(arm: Arm, user_phis: &[(u32, f64, u32)]) -> ArmRun {
        // (user, phi, y_obs) — one impression per user.
        let impressions: Vec<ImpressionLog> = user_phis
            .iter()
            .map(|&(user_id, phi, _)| ImpressionLog {
                user_id,
                day: 0,
                hour: 0,
                auction_id: u64::from(user_id),
                arm,
                slot_id: 0,
                features: Features {
                    visit_frequency: 0.0,
                    distance_km: 0.0,
                    prior_impressions: 0,
                    logged_pcvr: 0.05,
                },
                exposure_count_before: 0,
                bin_before: exposure_bin(0),
                phi,
                pcvr: 0.05,
                bid_micros: Micros(100),
                won: false,
                price_paid_micros: Micros::ZERO,
                clearing_price_micros: None,
                mechanism: Mechanism::FirstPrice,
                clicked: false,
            })
            .collect();
        let labels = user_phis
            .iter()
            .map(|&(user_id, _, y)| VisitLabel { user_id, s_final: 0, y_obs: y })
            .collect();
        ArmRun {
            arm,
            impressions,
            labels,
            pacing: Vec::new(),
            final_spend: Micros::ZERO,
            final_alpha: 0.1,
        }
    }

    #[test]
    fn phi_histogram_groups_users_by_mean_multiplier() {
        let run = run_with_phis(
            Arm::Naive,
            &[(0, 0.2, 1), (1, 0.3, 3), (2, 1.0, 2), (3, -4.0, 9), (4, 7.0, 5)],
        );
        let rows = phi_bin_rows(&[run]);
        assert_eq!(rows.len(), 7);
        // Users 0, 1 and the negative-φ user (floored to 0) land in bin 0.
        assert_eq!(rows[0].users, 3);
        assert_relative_eq!(rows[0].mean_visits.unwrap(), (1.0 + 3.0 + 9.0) / 3.0);
        // User 2 in bin 1; user 4 (φ=7) is beyond the last edge and dropped.
        assert_eq!(rows[1].users, 1);
        assert_eq!(rows[1].se, None, "single user has no spread");
        assert_eq!(rows[2].users, 0);
        assert_eq!(rows[2].mean_visits, None);
        // Control contributes nothing.
        let with_control = [run_with_phis(Arm::Control, &[(9, 1.0, 1)])];
        assert!(phi_bin_rows(&with_control).is_empty());
    }

    #[test]
    fn report_files_are_deterministic_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_with_phis(Arm::Baseline, &[(0, 0.4, 1), (1, 1.2, 0)]);
        let control = run_with_phis(Arm::Control, &[(5, 0.0, 1)]);
        let report = compute_metrics(&[run.clone(), control.clone()], Micros(1_000_000));
        let pacing = vec![PacingRow {
            hour: 0,
            arm: Arm::Baseline,
            alpha: 0.25,
            window_spend_micros: Micros(123),
        }];
        let bins = phi_bin_rows(&[run, control]);
        write_run_reports(dir.path(), &report, &pacing, &bins).unwrap();

        let json_path = dir.path().join("report.json");
        assert_eq!(read_report_json(&json_path).unwrap(), report);
        let first = std::fs::read(&json_path).unwrap();
        write_report_json(&json_path, &report).unwrap();
        assert_eq!(std::fs::read(&json_path).unwrap(), first);

        let csv_text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(csv_text.starts_with("arm,metric,value,se,normalized\n"), "got: {csv_text}");
        assert!(csv_text.contains("\nbaseline,mean_visits,"));
        let pacing_text = std::fs::read_to_string(dir.path().join("pacing.csv")).unwrap();
        assert!(pacing_text.starts_with("hour,arm,alpha,window_spend_micros\n"));
        assert!(pacing_text.contains("0,baseline,0.25,123"));
        let bins_text = std::fs::read_to_string(dir.path().join("fig3_bins.csv")).unwrap();
        assert!(bins_text.starts_with("arm,bin,phi_lo,phi_hi,users,mean_visits,se\n"));
    }

    #[test]
    fn empty_report_writes_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let report = compute_metrics(&[], Micros(1_000_000));
        write_run_reports(dir.path(), &report, &[], &[]).unwrap();
        let csv_text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(csv_text, "arm,metric,value,se,normalized\n");
        let pacing_text = std::fs::read_to_string(dir.path().join("pacing.csv")).unwrap();
        assert_eq!(pacing_text, "hour,arm,alpha,window_spend_micros\n");
    }
}
