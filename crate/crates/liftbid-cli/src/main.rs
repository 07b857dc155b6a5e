//! `liftbid` — drive the lift-bidding pipeline from the shell, one subcommand
//! per stage:
//!
//! ```text
//! liftbid simulate-log --config desk.toml            # biased logging campaign
//! liftbid train        --config desk.toml --mode erm # one model bundle
//! liftbid experiment   --config desk.toml            # five-arm A/B + reports
//! liftbid report       --run-dir out/run-42 --format json
//! ```
//!
//! All artifacts land under `<out>/<run_id>/`; `--out` falls back to the
//! `LIFTBID_OUT` environment variable, then the current directory. Identical
//! config and seed give byte-identical artifacts.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use liftbid_core::domain::Arm;
use liftbid_core::harness::{
    compute_metrics, phi_bin_rows, run_ab_experiment, run_logging_campaign, train_single_bundle,
    write_phi_bins_csv, write_report_csv, write_report_json, write_run_reports, ArmRun,
    TrainedBundles,
};
use liftbid_core::learning::TrainMode;
use liftbid_core::logio::{read_impressions, read_labels, write_impressions, write_labels};
use liftbid_core::{Micros, ModelBundle};

use crate::config::{load_resolved, out_root, ResolvedRun, RunConfig};

#[derive(Parser)]
#[command(
    name = "liftbid",
    about = "Seeded bidding-marketplace simulator comparing conversion-rate and lift bidding",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the single-arm logging campaign that produces biased training logs.
    SimulateLog(SimulateLogArgs),
    /// Train one model bundle from logging artifacts.
    Train(TrainArgs),
    /// Run the five-arm A/B experiment from trained bundles and write reports.
    Experiment(ExperimentArgs),
    /// Recompute report files from a run directory's raw logs.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config file's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (default: $LIFTBID_OUT, then the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<(ResolvedRun, PathBuf)> {
        let cfg = RunConfig::load(&self.config)?;
        let resolved = cfg.resolve(self.seed)?;
        let root = out_root(self.out.clone());
        Ok((resolved, root))
    }
}

#[derive(Args)]
struct SimulateLogArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Erm,
    Ips,
    IpsClipped,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> TrainMode {
        match m {
            ModeArg::Erm => TrainMode::Erm,
            ModeArg::Ips => TrainMode::Ips,
            ModeArg::IpsClipped => TrainMode::IpsClipped,
        }
    }
}

fn mode_file_name(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Erm => "erm.json",
        TrainMode::Ips => "ips.json",
        TrainMode::IpsClipped => "ips-clipped.json",
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training mode for the outcome models.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Directory holding `impressions.jsonl` and `labels.csv`
    /// (default: `<out>/<run_id>/logging`).
    #[arg(long)]
    logs: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding `erm.json`, `ips.json`, and `ips-clipped.json`
    /// (default: `<out>/<run_id>/bundles`).
    #[arg(long)]
    bundles_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    /// A run directory containing `config.resolved` and per-arm logs.
    #[arg(long)]
    run_dir: PathBuf,
    /// Which report file to (re)write; `fig3_bins.csv` accompanies `csv`.
    #[arg(long, value_enum, default_value = "csv")]
    format: ReportFormat,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SimulateLog(args) => cmd_simulate_log(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Experiment(args) => cmd_experiment(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn cmd_simulate_log(args: &SimulateLogArgs) -> Result<()> {
    let (resolved, root) = args.common.resolve()?;
    let run = run_logging_campaign(&resolved.plan)?;

    wrote(&resolved.write_resolved(&root)?);
    let dir = resolved.dir(&root).join("logging");
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let impressions = dir.join("impressions.jsonl");
    write_impressions(&impressions, &run.impressions)?;
    wrote(&impressions);
    let labels = dir.join("labels.csv");
    write_labels(&labels, &run.labels)?;
    wrote(&labels);
    Ok(())
}

fn read_log_dir(dir: &Path) -> Result<(Vec<liftbid_core::domain::ImpressionLog>, Vec<liftbid_core::domain::VisitLabel>)> {
    let impressions = read_impressions(&dir.join("impressions.jsonl"))?;
    let labels = read_labels(&dir.join("labels.csv"))?;
    Ok((impressions, labels))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (resolved, root) = args.common.resolve()?;
    let logs_dir = args
        .logs
        .clone()
        .unwrap_or_else(|| resolved.dir(&root).join("logging"));
    let (impressions, labels) = read_log_dir(&logs_dir)?;
    if impressions.is_empty() {
        bail!("no impressions in {} — run simulate-log first", logs_dir.display());
    }

    let mode = TrainMode::from(args.mode);
    let bundle = train_single_bundle(&impressions, &labels, mode, &resolved.plan)?;

    let dir = resolved.dir(&root).join("bundles");
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(mode_file_name(mode));
    std::fs::write(&path, bundle.to_json())
        .with_context(|| format!("cannot write {}", path.display()))?;
    wrote(&path);
    Ok(())
}

fn load_bundle(dir: &Path, mode: TrainMode) -> Result<ModelBundle> {
    let path = dir.join(mode_file_name(mode));
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read bundle {}", path.display()))?;
    let bundle = ModelBundle::from_json(&text)
        .map_err(|e| anyhow!("bundle {}: {e}", path.display()))?;
    if bundle.mode != mode {
        bail!(
            "bundle {} was trained in mode {:?}, expected {:?}",
            path.display(),
            bundle.mode,
            mode
        );
    }
    Ok(bundle)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let (resolved, root) = args.common.resolve()?;
    let bundles_dir = args
        .bundles_dir
        .clone()
        .unwrap_or_else(|| resolved.dir(&root).join("bundles"));
    let bundles = TrainedBundles {
        erm: load_bundle(&bundles_dir, TrainMode::Erm)?,
        ips: load_bundle(&bundles_dir, TrainMode::Ips)?,
        ips_clipped: load_bundle(&bundles_dir, TrainMode::IpsClipped)?,
    };

    let runs = run_ab_experiment(&resolved.plan, &bundles)?;

    wrote(&resolved.write_resolved(&root)?);
    let run_dir = resolved.dir(&root);
    for run in &runs {
        let dir = run_dir.join(run.arm.name());
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        let impressions = dir.join("impressions.jsonl");
        write_impressions(&impressions, &run.impressions)?;
        wrote(&impressions);
        let labels = dir.join("labels.csv");
        write_labels(&labels, &run.labels)?;
        wrote(&labels);
    }

    let report = compute_metrics(&runs, resolved.plan.experiment.cpc_micros);
    let pacing: Vec<_> = runs.iter().flat_map(|r| r.pacing.iter().copied()).collect();
    let phi_bins = phi_bin_rows(&runs);
    write_run_reports(&run_dir, &report, &pacing, &phi_bins)?;
    for name in ["report.csv", "report.json", "pacing.csv", "fig3_bins.csv"] {
        wrote(&run_dir.join(name));
    }
    Ok(())
}

/// Reassemble per-arm runs from the raw logs in a run directory. Pacing rows
/// are not recoverable from impressions, so reconstructed runs carry empty
/// trajectories — the metric fold never reads them.
fn read_runs(run_dir: &Path) -> Result<Vec<ArmRun>> {
    let mut runs = Vec::with_capacity(Arm::COUNT);
    for arm in Arm::ALL {
        let dir = run_dir.join(arm.name());
        if !dir.is_dir() {
            bail!("run directory {} has no `{}` arm logs", run_dir.display(), arm.name());
        }
        let (impressions, labels) = read_log_dir(&dir)?;
        let final_spend: Micros = impressions.iter().map(|r| r.price_paid_micros).sum();
        runs.push(ArmRun {
            arm,
            impressions,
            labels,
            pacing: Vec::new(),
            final_spend,
            final_alpha: 0.0,
        });
    }
    Ok(runs)
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let resolved = load_resolved(&args.run_dir)?;
    let runs = read_runs(&args.run_dir)?;
    let report = compute_metrics(&runs, resolved.plan.experiment.cpc_micros);
    match args.format {
        ReportFormat::Csv => {
            let path = args.run_dir.join("report.csv");
            write_report_csv(&path, &report)?;
            wrote(&path);
            let bins = args.run_dir.join("fig3_bins.csv");
            write_phi_bins_csv(&bins, &phi_bin_rows(&runs))?;
            wrote(&bins);
        }
        ReportFormat::Json => {
            let path = args.run_dir.join("report.json");
            write_report_json(&path, &report)?;
            wrote(&path);
        }
    }
    Ok(())
}
