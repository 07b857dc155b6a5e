//! Run configuration: a TOML file with `market`, `learner`, `pacing`, and
//! `experiment` sections (every field defaulted), a required `seed` (from the
//! file or `--seed`), and an optional `run_id`. The effective configuration is
//! echoed into `<run_id>/config.resolved` so a run is reproducible from its
//! artifacts alone.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use liftbid_core::harness::{ExperimentConfig, ExperimentPlan};
use liftbid_core::learning::LearnerConfig;
use liftbid_core::market::MarketConfig;
use liftbid_core::pacing::PacingConfig;
use serde::{Deserialize, Serialize};

/// The configuration file schema. Scalars are declared before the sections so
/// the serialized echo parses back as the same document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Artifact directory name under the output root; default `run-<seed>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    /// Root seed for every random substream. Required here or via `--seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub market: MarketConfig,
    pub learner: LearnerConfig,
    pub pacing: PacingConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| anyhow!("config {}: {}", path.display(), e.to_string().trim_end()))
    }

    /// Apply the `--seed` override and produce an executable plan. A missing
    /// seed is the one hard configuration error.
    pub fn resolve(&self, seed_flag: Option<u64>) -> Result<ResolvedRun> {
        let seed = seed_flag
            .or(self.seed)
            .ok_or_else(|| anyhow!("missing config key `seed` (set it in the config file or pass --seed)"))?;
        let plan = ExperimentPlan {
            market: self.market,
            learner: self.learner,
            pacing: self.pacing,
            experiment: self.experiment,
            seed,
        };
        plan.validate().map_err(|e| anyhow!("invalid config: {e}"))?;
        let run_id = self.run_id.clone().unwrap_or_else(|| format!("run-{seed}"));
        Ok(ResolvedRun { plan, run_id })
    }
}

/// A validated plan plus the artifact directory name it runs under.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub plan: ExperimentPlan,
    pub run_id: String,
}

impl ResolvedRun {
    /// The directory all artifacts of this run live in.
    pub fn dir(&self, out_root: &Path) -> PathBuf {
        out_root.join(&self.run_id)
    }

    /// The effective configuration as a TOML document that parses back into
    /// an identical [`RunConfig`].
    pub fn resolved_toml(&self) -> String {
        let echo = RunConfig {
            run_id: Some(self.run_id.clone()),
            seed: Some(self.plan.seed),
            market: self.plan.market,
            learner: self.plan.learner,
            pacing: self.plan.pacing,
            experiment: self.plan.experiment,
        };
        toml::to_string_pretty(&echo).expect("config always serializes")
    }

    /// Write `config.resolved` into the run directory.
    pub fn write_resolved(&self, out_root: &Path) -> Result<PathBuf> {
        let dir = self.dir(out_root);
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create run directory {}", dir.display()))?;
        let path = dir.join("config.resolved");
        std::fs::write(&path, self.resolved_toml())
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Read a `config.resolved` back into a plan (used by `report`).
pub fn load_resolved(run_dir: &Path) -> Result<ResolvedRun> {
    let path = run_dir.join("config.resolved");
    let cfg = RunConfig::load(&path)?;
    cfg.resolve(None)
}

/// Output root: `--out` flag, else `LIFTBID_OUT`, else the current directory.
pub fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("LIFTBID_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
