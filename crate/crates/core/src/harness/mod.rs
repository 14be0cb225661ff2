//! Experiment runner: configuration, training, evaluation, ablations and
//! the files each stage writes.
//!
//! Stages talk to each other through files in one output directory:
//!
//! ```text
//! models/<policy>-seed<seed>.json      flow-model checkpoint
//! models/<policy>-seed<seed>.loss.csv  per-episode training statistics
//! metrics.csv                          one row per (policy, seed, scenario)
//! report.md                            aggregated tables
//! ablation/metrics.csv, ablation.md    MC vs SC and personalized vs fixed
//! ```

pub mod cli;
mod output;
mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::OutputGuard;
pub use report::{
    aggregate, compare, read_metrics, render_ablation, render_report, write_metrics, Comparison, MetricsRow, ReportRow,
};

use crate::controller::{episode_rng, run_episode, train_policy, ControllerConfig, PolicyKind, TrainingLogRow};
use crate::dataset::{build_scenarios, synthesize_dataset, ClassCounts, Dataset, DatasetConfig, Scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::gfn::FlowModel;
use crate::objective::QoeBounds;
use crate::traces::BandwidthClass;

/// Everything an experiment run depends on besides the dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Dataset directory (holding `manifest.json`). Relative paths are
    /// resolved against the config file's directory.
    pub dataset: PathBuf,
    pub policies: Vec<String>,
    /// Evaluation scenarios.
    pub scenarios: ScenarioSpec,
    /// Scenarios cycled through during training.
    pub training_scenarios: ScenarioSpec,
    pub seeds: Vec<u64>,
    /// Training episodes per (policy, seed).
    pub train_episodes: usize,
    pub controller: ControllerConfig,
    pub bounds: QoeBounds,
    /// Settings for `gen-dataset`.
    pub generator: DatasetConfig,
    pub dataset_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data/demo"),
            policies: PolicyKind::NAMES.iter().map(|s| s.to_string()).collect(),
            scenarios: ScenarioSpec::default(),
            training_scenarios: ScenarioSpec {
                per_class: ClassCounts {
                    low: 7,
                    medium: 7,
                    high: 6,
                },
                queue_len: 8,
                seed: 1_000,
            },
            seeds: vec![1, 2, 3],
            train_episodes: 40,
            controller: ControllerConfig::default(),
            bounds: QoeBounds::default(),
            generator: DatasetConfig::default(),
            dataset_seed: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a TOML config and resolves the dataset path next to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policy list is empty".into()));
        }
        self.controller.validate()?;
        self.generator.validate()?;
        self.policy_kinds()?;
        let mut names = self.policies.clone();
        names.sort();
        names.dedup();
        if names.len() != self.policies.len() {
            return Err(Error::Config("policy list has duplicates".into()));
        }
        Ok(())
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        self.policies
            .iter()
            .map(|n| PolicyKind::from_name(n, &self.controller))
            .collect()
    }

    /// Keeps only `policy` (which must be configured, or at least known).
    pub fn restrict_policy(&mut self, policy: &str) -> Result<()> {
        PolicyKind::from_name(policy, &self.controller)?;
        self.policies = vec![policy.to_string()];
        Ok(())
    }

    /// Evaluates only scenarios of `class`.
    pub fn restrict_class(&mut self, class: BandwidthClass) {
        let n = self.scenarios.per_class.get(class);
        self.scenarios.per_class = ClassCounts::only(class, n);
    }

    /// Loads the dataset and adopts its bitrate ladder.
    pub fn load_dataset(&mut self) -> Result<Dataset> {
        if !self.dataset.join(crate::dataset::MANIFEST_FILE).is_file() {
            return Err(Error::Config(format!(
                "no dataset manifest under {}",
                self.dataset.display()
            )));
        }
        let ds = Dataset::read_dir(&self.dataset)?;
        self.controller.ladder = ds.config.ladder.clone();
        Ok(ds)
    }
}

/// Path of the checkpoint for `(policy, seed)` under `models_dir`.
pub fn model_path(models_dir: &Path, policy: &str, seed: u64) -> PathBuf {
    models_dir.join(format!("{policy}-seed{seed}.json"))
}

pub fn loss_curve_path(models_dir: &Path, policy: &str, seed: u64) -> PathBuf {
    models_dir.join(format!("{policy}-seed{seed}.loss.csv"))
}

/// A trained model with its training log.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub policy: String,
    pub seed: u64,
    pub model: FlowModel,
    pub log: Vec<TrainingLogRow>,
}

/// Trains every learned policy for every seed. Pairs train in parallel;
/// each run is sequential and seeded, so results do not depend on the
/// thread count.
pub fn train_all(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<TrainedModel>> {
    let train_set = build_scenarios(dataset, &cfg.training_scenarios)?;
    let jobs: Vec<(PolicyKind, u64)> = cfg
        .policy_kinds()?
        .into_iter()
        .filter(PolicyKind::is_learned)
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p.clone(), s)))
        .collect();
    jobs.par_iter()
        .map(|(policy, seed)| {
            let (model, log) = train_policy(policy, &train_set, cfg.train_episodes, &cfg.controller, *seed)?;
            Ok(TrainedModel {
                policy: policy.name().to_string(),
                seed: *seed,
                model,
                log,
            })
        })
        .collect()
}

/// Writes checkpoints and loss curves, registering each file with `guard`.
pub fn save_models(models: &[TrainedModel], models_dir: &Path, guard: &mut OutputGuard) -> Result<()> {
    guard.create_dir_all(models_dir)?;
    for m in models {
        let path = model_path(models_dir, &m.policy, m.seed);
        guard.track(&path);
        m.model.save(&path)?;
        let curve = loss_curve_path(models_dir, &m.policy, m.seed);
        guard.track(&curve);
        let mut w = csv::Writer::from_path(&curve)?;
        for row in &m.log {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Source of the model used for a learned policy at evaluation time.
pub trait ModelSource {
    fn model(&self, policy: &str, seed: u64) -> Result<FlowModel>;
}

impl ModelSource for [TrainedModel] {
    fn model(&self, policy: &str, seed: u64) -> Result<FlowModel> {
        self.iter()
            .find(|m| m.policy == policy && m.seed == seed)
            .map(|m| m.model.clone())
            .ok_or_else(|| Error::Config(format!("no trained model for {policy} seed {seed}")))
    }
}

/// Checkpoints on disk, validated against the expected architecture.
pub struct ModelDir<'a> {
    pub dir: &'a Path,
    pub layers: Vec<usize>,
}

impl ModelSource for ModelDir<'_> {
    fn model(&self, policy: &str, seed: u64) -> Result<FlowModel> {
        let path = model_path(self.dir, policy, seed);
        if !path.is_file() {
            return Err(Error::Config(format!(
                "missing checkpoint {} (run `train` first)",
                path.display()
            )));
        }
        FlowModel::load(&path, Some(&self.layers))
    }
}

/// Evaluates every configured policy on every scenario for every seed.
///
/// Rows come out ordered by policy (config order), seed, then scenario.
pub fn evaluate_all<M: ModelSource + ?Sized>(
    cfg: &ExperimentConfig,
    scenarios: &[Scenario],
    models: &M,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for policy in cfg.policy_kinds()? {
        for &seed in &cfg.seeds {
            let model = if policy.is_learned() {
                models.model(policy.name(), seed)?
            } else {
                FlowModel::zeros(&cfg.controller.layers())?
            };
            let batch = scenarios
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let r = run_episode(&policy, &model, s, &cfg.controller, &mut episode_rng(seed, i))?;
                    Ok(MetricsRow::new(policy.name(), s, seed, &r.metrics, cfg))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.extend(batch);
        }
    }
    Ok(rows)
}

/// Result of the two ablation suites.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub rows: Vec<MetricsRow>,
    /// Multi-candidate (a) against single-candidate (b).
    pub mc_vs_sc: Comparison,
    /// True preferences (a) against fixed preferences (b).
    pub personalized_vs_fixed: Comparison,
}

pub const ABLATION_POLICIES: [&str; 3] = ["gfn-multi", "gfn-single", "gfn-fixed-pref"];

/// Trains and evaluates the three learned variants and compares them.
pub fn run_ablation(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<AblationSummary> {
    let mut cfg = cfg.clone();
    cfg.policies = ABLATION_POLICIES.iter().map(|s| s.to_string()).collect();
    let models = train_all(&cfg, dataset)?;
    let scenarios = build_scenarios(dataset, &cfg.scenarios)?;
    let rows = evaluate_all(&cfg, &scenarios, models.as_slice())?;
    Ok(AblationSummary {
        mc_vs_sc: compare(&rows, "gfn-multi", "gfn-single")?,
        personalized_vs_fixed: compare(&rows, "gfn-multi", "gfn-fixed-pref")?,
        rows,
    })
}

/// Cells `(policy, class)` the evaluation config asks for.
pub fn expected_cells(cfg: &ExperimentConfig) -> Vec<(String, BandwidthClass)> {
    let mut cells = Vec::new();
    for p in &cfg.policies {
        for c in BandwidthClass::ALL {
            if cfg.scenarios.per_class.get(c) > 0 {
                cells.push((p.clone(), c));
            }
        }
    }
    cells
}

/// Generates a dataset from `cfg.generator` into `out`.
pub fn generate_dataset(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Dataset> {
    let ds = synthesize_dataset(&cfg.generator, seed)?;
    ds.write_dir(out)?;
    Ok(ds)
}

/// The whole chain (train, evaluate, report) into `out`, returning the
/// metrics rows. Used by the CLI's stages and by determinism checks.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MetricsRow>> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let dataset = cfg.load_dataset()?;
    let mut guard = OutputGuard::new();
    guard.create_dir_all(out)?;
    let models = train_all(&cfg, &dataset)?;
    save_models(&models, &out.join("models"), &mut guard)?;
    let scenarios = build_scenarios(&dataset, &cfg.scenarios)?;
    let rows = evaluate_all(&cfg, &scenarios, models.as_slice())?;
    let metrics = out.join("metrics.csv");
    guard.track(&metrics);
    write_metrics(&metrics, &rows)?;
    let table = aggregate(&rows, &expected_cells(&cfg))?;
    let md = out.join("report.md");
    guard.track(&md);
    std::fs::write(&md, render_report(&table, &rows, &cfg.bounds))?;
    guard.commit();
    Ok(rows)
}
