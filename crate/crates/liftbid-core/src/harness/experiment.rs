//! The two-phase experiment: a confounded logging campaign generates
//! training data, three bundles are trained from it (plain, reweighted,
//! reweighted-and-clipped), and five arms then compete over disjoint user
//! fifths with live pacing.

use crate::bidding::{BidderVariant, LoggingPolicy, PctrModel};
use crate::domain::{Arm, ImpressionLog, Micros, UserId, VisitLabel};
use crate::harness::engine::{run_campaign, ArmRun, CampaignSpec, PacingRow, Policy};
use crate::harness::metrics::{compute_metrics, MetricsReport};
use crate::harness::plan::ExperimentPlan;
use crate::harness::report::{phi_bin_rows, PhiBinRow};
use crate::harness::HarnessError;
use crate::learning::{fit_shared, train_bundle_with, TrainMode, TrainingSet};
use crate::market::{Landscape, Population};
use crate::pacing::PacingConfig;
use crate::ModelBundle;

/// The three bundles one logging campaign yields, one per training mode.
/// The baseline arm reads its pooled models from the plain bundle (they are
/// mode-independent and shared across all three).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedBundles {
    pub erm: ModelBundle,
    pub ips: ModelBundle,
    pub ips_clipped: ModelBundle,
}

impl TrainedBundles {
    pub fn by_mode(&self, mode: TrainMode) -> &ModelBundle {
        match mode {
            TrainMode::Erm => &self.erm,
            TrainMode::Ips => &self.ips,
            TrainMode::IpsClipped => &self.ips_clipped,
        }
    }

    /// The bundle an A/B arm loads; control loads none.
    pub fn for_arm(&self, arm: Arm) -> Option<&ModelBundle> {
        match arm {
            Arm::Baseline | Arm::Naive => Some(&self.erm),
            Arm::Unbiased => Some(&self.ips_clipped),
            Arm::Noclip => Some(&self.ips),
            Arm::Control => None,
        }
    }
}

/// Everything a full seeded run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub logging: ArmRun,
    pub bundles: TrainedBundles,
    /// Arm runs in canonical order (baseline, naive, unbiased, noclip,
    /// control).
    pub ab: Vec<ArmRun>,
    pub report: MetricsReport,
}

impl PipelineResult {
    pub fn ab_run(&self, arm: Arm) -> &ArmRun {
        self.ab.iter().find(|r| r.arm == arm).expect("all five arms present")
    }

    /// Concatenated pacing trajectories of the A/B arms.
    pub fn pacing_rows(&self) -> Vec<PacingRow> {
        self.ab.iter().flat_map(|r| r.pacing.iter().copied()).collect()
    }

    pub fn phi_bins(&self) -> Vec<PhiBinRow> {
        phi_bin_rows(&self.ab)
    }
}

fn fixed_alpha_pacing(alpha: f64) -> PacingConfig {
    PacingConfig {
        alpha_min: alpha,
        alpha_max: alpha,
        initial_alpha: alpha,
        ..PacingConfig::default()
    }
}

/// Phase 1: the pre-training policy serves the whole population for
/// `logging_days` at a fixed α with no budget cap, producing the biased
/// training logs (exposure concentrates on high conversion-rate users).
pub fn run_logging_campaign(plan: &ExperimentPlan) -> Result<ArmRun, HarnessError> {
    plan.validate()?;
    let population = Population::generate(&plan.market, plan.seed)?;
    let landscape = Landscape::new(plan.market.landscape);
    let users: Vec<UserId> = population.users().iter().map(|u| u.user_id).collect();
    let policy = Policy::Logging(LoggingPolicy::from_population(
        population.users().iter().map(|u| u.features.logged_pcvr),
    )?);
    let spec = CampaignSpec {
        phase: "log",
        arm: Arm::Baseline,
        users,
        days: plan.experiment.logging_days,
        requests_per_user_per_day: plan.market.auctions_per_user_per_day,
        cpc: plan.experiment.cpc_micros,
        pacing: fixed_alpha_pacing(plan.experiment.logging_alpha),
        budget: Micros(i64::MAX),
    };
    run_campaign(&population, &landscape, spec, &policy, plan.seed)
}

/// Beta prior (successes, failures) for the per-slot click model, matching
/// the 1% prior click-through rate the logging policy assumes.
const PCTR_PRIOR: (f64, f64) = (1.0, 99.0);

/// Phase 2: train the three bundles from logging artifacts. The propensity
/// model and the pooled models are fitted once and shared; only the outcome
/// models differ by mode. The click model is counted from won impressions.
pub fn train_bundles(
    impressions: &[ImpressionLog],
    labels: &[VisitLabel],
    plan: &ExperimentPlan,
) -> Result<TrainedBundles, HarnessError> {
    let set: TrainingSet<f64> = TrainingSet::from_logs(impressions, labels);
    let pctr = PctrModel::from_impressions(impressions, PCTR_PRIOR.0, PCTR_PRIOR.1);
    let cfg = &plan.learner;
    let shared = fit_shared(&set, cfg)?;
    Ok(TrainedBundles {
        erm: train_bundle_with(&set, pctr.clone(), TrainMode::Erm, cfg, plan.seed, &shared)?,
        ips: train_bundle_with(&set, pctr.clone(), TrainMode::Ips, cfg, plan.seed, &shared)?,
        ips_clipped: train_bundle_with(
            &set,
            pctr,
            TrainMode::IpsClipped,
            cfg,
            plan.seed,
            &shared,
        )?,
    })
}

/// Train one bundle for one mode — the single-mode equivalent of
/// [`train_bundles`], producing bit-identical results for the matching mode.
pub fn train_single_bundle(
    impressions: &[ImpressionLog],
    labels: &[VisitLabel],
    mode: TrainMode,
    plan: &ExperimentPlan,
) -> Result<ModelBundle, HarnessError> {
    let set: TrainingSet<f64> = TrainingSet::from_logs(impressions, labels);
    let pctr = PctrModel::from_impressions(impressions, PCTR_PRIOR.0, PCTR_PRIOR.1);
    let shared = fit_shared(&set, &plan.learner)?;
    Ok(train_bundle_with(&set, pctr, mode, &plan.learner, plan.seed, &shared)?)
}

/// Phase 3: the five-arm A/B run on disjoint user fifths, each bidding arm
/// paced against its own budget.
pub fn run_ab_experiment(
    plan: &ExperimentPlan,
    bundles: &TrainedBundles,
) -> Result<Vec<ArmRun>, HarnessError> {
    plan.validate()?;
    let population = Population::generate(&plan.market, plan.seed)?;
    let landscape = Landscape::new(plan.market.landscape);
    let cpc = plan.experiment.cpc_micros;

    let mut runs = Vec::with_capacity(Arm::COUNT);
    for arm in Arm::ALL {
        let users: Vec<UserId> = population.arm_users(arm).map(|u| u.user_id).collect();
        let policy = match bundles.for_arm(arm) {
            None => Policy::Silent,
            Some(bundle) => Policy::Trained(BidderVariant::new(arm, bundle, cpc)?),
        };
        let spec = CampaignSpec {
            phase: "ab",
            arm,
            users,
            days: plan.experiment.ab_days,
            requests_per_user_per_day: plan.market.auctions_per_user_per_day,
            cpc,
            pacing: plan.pacing,
            budget: plan.budget(arm),
        };
        runs.push(run_campaign(&population, &landscape, spec, &policy, plan.seed)?);
    }
    Ok(runs)
}

/// The full seeded pipeline: log → train → A/B → metrics.
pub fn run_pipeline(plan: &ExperimentPlan) -> Result<PipelineResult, HarnessError> {
    let logging = run_logging_campaign(plan)?;
    let bundles = train_bundles(&logging.impressions, &logging.labels, plan)?;
    let ab = run_ab_experiment(plan, &bundles)?;
    let report = compute_metrics(&ab, plan.experiment.cpc_micros);
    Ok(PipelineResult { logging, bundles, ab, report })
}
