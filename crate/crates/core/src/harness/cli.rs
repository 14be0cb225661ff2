//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 usage error, 2 validation error, 3 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::{
    aggregate, evaluate_all, expected_cells, generate_dataset, read_metrics, render_ablation, render_report,
    report::cells_in, run_ablation, save_models, train_all, write_metrics, ExperimentConfig, ModelDir, OutputGuard,
};
use crate::dataset::build_scenarios;
use crate::error::{Error, Result};
use crate::traces::BandwidthClass;

#[derive(Debug, Parser)]
#[command(name = "feedflow", version, about = "Short-video feed streaming experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Restrict to one policy (gfn-multi, gfn-single, gfn-fixed-pref, rule-based).
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// Restrict evaluation to one bandwidth class.
    #[arg(long, global = true)]
    pub class: Option<BandwidthClass>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a dataset directory.
    GenDataset,
    /// Train flow models; writes checkpoints and loss curves under <out>/models.
    Train,
    /// Evaluate policies; writes <out>/metrics.csv.
    Evaluate,
    /// Run the MC vs SC and personalized vs fixed suites into <out>/ablation.
    Ablate,
    /// Aggregate <out>/metrics*.csv into <out>/report.md.
    Report,
}

impl Cli {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(p) = &self.policy {
            cfg.restrict_policy(p)?;
        }
        if let Some(c) = self.class {
            cfg.restrict_class(c);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::GenDataset => gen_dataset(cli),
        Command::Train => train(cli),
        Command::Evaluate => evaluate(cli),
        Command::Ablate => ablate(cli),
        Command::Report => report(cli),
    }
}

fn gen_dataset(cli: &Cli) -> Result<()> {
    let cfg = cli.experiment()?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.dataset.clone());
    if out.exists() && std::fs::read_dir(&out)?.next().is_some() {
        return Err(Error::Validation(format!("{} exists and is not empty", out.display())));
    }
    let seed = cli.seed.unwrap_or(cfg.dataset_seed);
    let mut guard = OutputGuard::new();
    guard.create_dir_all(&out)?;
    // Files land inside `out`; track them so a failed write leaves nothing behind.
    for name in [crate::dataset::MANIFEST_FILE, "videos.csv", "users.csv", "prefs.csv", "network"] {
        guard.track(&out.join(name));
    }
    let ds = generate_dataset(&cfg, seed, &out).inspect_err(|_| {
        let _ = std::fs::remove_dir_all(out.join("network"));
    })?;
    guard.commit();
    println!(
        "wrote {} traces, {} videos, {} users to {}",
        ds.traces.len(),
        ds.videos.len(),
        ds.users.len(),
        out.display()
    );
    Ok(())
}

fn train(cli: &Cli) -> Result<()> {
    let mut cfg = cli.experiment()?;
    let dataset = cfg.load_dataset()?;
    let out = cli.out_dir();
    let models = train_all(&cfg, &dataset)?;
    if models.is_empty() {
        return Err(Error::Config("no learned policy selected; nothing to train".into()));
    }
    let mut guard = OutputGuard::new();
    save_models(&models, &out.join("models"), &mut guard)?;
    guard.commit();
    for m in &models {
        let last = m.log.last().map_or(f64::NAN, |r| r.mean_tb_loss);
        println!("trained {} seed {}: {} episodes, final TB loss {last:.4}", m.policy, m.seed, m.log.len());
    }
    Ok(())
}

fn evaluate(cli: &Cli) -> Result<()> {
    let mut cfg = cli.experiment()?;
    let dataset = cfg.load_dataset()?;
    let out = cli.out_dir();
    let scenarios = build_scenarios(&dataset, &cfg.scenarios)?;
    let models_dir = out.join("models");
    let source = ModelDir {
        dir: &models_dir,
        layers: cfg.controller.layers(),
    };
    let rows = evaluate_all(&cfg, &scenarios, &source)?;
    let mut guard = OutputGuard::new();
    guard.create_dir_all(&out)?;
    let path = out.join("metrics.csv");
    guard.track(&path);
    write_metrics(&path, &rows)?;
    guard.commit();
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn ablate(cli: &Cli) -> Result<()> {
    let mut cfg = cli.experiment()?;
    let dataset = cfg.load_dataset()?;
    let summary = run_ablation(&cfg, &dataset)?;
    let dir = cli.out_dir().join("ablation");
    let mut guard = OutputGuard::new();
    guard.create_dir_all(&dir)?;
    let metrics = dir.join("metrics.csv");
    guard.track(&metrics);
    write_metrics(&metrics, &summary.rows)?;
    let md = dir.join("ablation.md");
    guard.track(&md);
    let text = render_ablation(&summary.mc_vs_sc, &summary.personalized_vs_fixed);
    std::fs::write(&md, &text)?;
    guard.commit();
    print!("{text}");
    Ok(())
}

/// Metrics files directly inside `dir`, sorted by name.
fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Validation(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("metrics") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn report(cli: &Cli) -> Result<()> {
    let out = cli.out_dir();
    let files = metrics_files(&out)?;
    if files.is_empty() {
        return Err(Error::Validation(format!("no metrics*.csv files in {}", out.display())));
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_metrics(f)?);
    }
    if let Some(p) = &cli.policy {
        rows.retain(|r| &r.policy == p);
    }
    if let Some(c) = cli.class {
        rows.retain(|r| r.class == c);
    }
    let (cells, bounds) = match &cli.config {
        Some(_) => {
            let cfg = cli.experiment()?;
            (expected_cells(&cfg), cfg.bounds)
        }
        None => (cells_in(&rows), Default::default()),
    };
    if cells.is_empty() {
        return Err(Error::Validation("metrics files contain no rows".into()));
    }
    let table = aggregate(&rows, &cells)?;
    let text = render_report(&table, &rows, &bounds);
    let path = out.join("report.md");
    let mut guard = OutputGuard::new();
    guard.track(&path);
    std::fs::write(&path, &text)?;
    guard.commit();
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["feedflow", "frobnicate"]), 1);
        assert_eq!(run(["feedflow", "report", "--bogus"]), 1);
        assert_eq!(run(["feedflow", "--help"]), 0);
    }

    #[test]
    fn report_on_empty_dir_fails_without_output() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().to_str().unwrap();
        assert_eq!(run(["feedflow", "report", "--out", out]), 2);
        assert!(!tmp.path().join("report.md").exists());
    }

    #[test]
    fn missing_config_is_a_validation_error() {
        assert_eq!(run(["feedflow", "train", "--config", "/nonexistent/x.toml"]), 2);
    }

    #[test]
    fn unknown_policy_is_a_validation_error() {
        assert_eq!(run(["feedflow", "evaluate", "--policy", "dqn"]), 2);
    }
}
