// Train the multi-candidate controller for a few episodes and compare it
// with the untrained model on held-out scenarios.

use feedflow::controller::{episode_rng, run_episode, train_policy, PolicyKind};
use feedflow::dataset::{build_scenarios, ClassCounts};
use feedflow::harness::ExperimentConfig;

pub fn run_example() -> feedflow::Result<(f64, f64)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo.toml");
    let mut cfg = ExperimentConfig::load(path.as_ref())?;
    let ds = cfg.load_dataset()?;
    cfg.training_scenarios.per_class = ClassCounts { low: 1, medium: 1, high: 1 };
    cfg.scenarios.per_class = ClassCounts { low: 1, medium: 1, high: 1 };
    let train_set = build_scenarios(&ds, &cfg.training_scenarios)?;
    let test_set = build_scenarios(&ds, &cfg.scenarios)?;

    let policy = PolicyKind::GfnMulti { k: cfg.controller.k };
    let (model, log) = train_policy(&policy, &train_set, 6, &cfg.controller, 11)?;
    for row in &log {
        println!(
            "episode {} on {:<10} TB loss {:>9.4}  objective {:>8.2}  log Z {:.3}",
            row.episode, row.scenario_id, row.mean_tb_loss, row.objective, row.log_z
        );
    }

    let untrained = cfg.controller.new_model(11)?;
    let (mut before, mut after) = (0.0, 0.0);
    for (i, s) in test_set.iter().enumerate() {
        before += run_episode(&policy, &untrained, s, &cfg.controller, &mut episode_rng(5, i))?.metrics.objective;
        after += run_episode(&policy, &model, s, &cfg.controller, &mut episode_rng(5, i))?.metrics.objective;
    }
    let n = test_set.len() as f64;
    println!("mean held-out objective: untrained {:.2}, trained {:.2}", before / n, after / n);
    Ok((before / n, after / n))
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
