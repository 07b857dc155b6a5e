//! Experiment orchestration: campaign simulation for each arm, the
//! two-phase pipeline (logging → training → five-arm A/B), the metric
//! suite, and report emission.

pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod plan;
pub mod report;

pub use engine::{ArmRun, PacingRow};
pub use experiment::{
    run_ab_experiment, run_logging_campaign, run_pipeline, train_bundles, train_single_bundle,
    PipelineResult, TrainedBundles,
};
pub use metrics::{compute_metrics, ArmMetrics, Metric, MetricsReport};
pub use plan::{ExperimentConfig, ExperimentPlan, PlanError};
pub use report::{
    phi_bin, phi_bin_rows, read_report_json, write_pacing_csv, write_phi_bins_csv,
    write_report_csv, write_report_json, write_run_reports, PhiBinRow, ReportRow, PHI_BIN_EDGES,
};

use thiserror::Error;

/// Any failure in the pipeline: invalid plans, market errors, training
/// failures, arm/bundle wiring mistakes, or artifact IO.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Market(#[from] crate::market::MarketConfigError),
    #[error(transparent)]
    Learn(#[from] crate::learning::LearnError),
    #[error(transparent)]
    Bid(#[from] crate::bidding::BidError),
    #[error(transparent)]
    Io(#[from] crate::logio::LogIoError),
}
