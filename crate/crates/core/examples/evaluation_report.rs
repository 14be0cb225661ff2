// A scaled-down experiment: train every learned variant briefly, evaluate
// all four policies and render the markdown report with the ablations.

use feedflow::dataset::{build_scenarios, ClassCounts};
use feedflow::harness::{aggregate, evaluate_all, expected_cells, render_report, train_all, ExperimentConfig};

pub fn run_example() -> feedflow::Result<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo.toml");
    let mut cfg = ExperimentConfig::load(path.as_ref())?;
    let ds = cfg.load_dataset()?;
    cfg.seeds = vec![1];
    cfg.train_episodes = 3;
    cfg.training_scenarios.per_class = ClassCounts { low: 1, medium: 1, high: 1 };
    cfg.scenarios.per_class = ClassCounts { low: 2, medium: 2, high: 2 };

    let models = train_all(&cfg, &ds)?;
    let scenarios = build_scenarios(&ds, &cfg.scenarios)?;
    let rows = evaluate_all(&cfg, &scenarios, models.as_slice())?;
    let table = aggregate(&rows, &expected_cells(&cfg))?;
    let text = render_report(&table, &rows, &cfg.bounds);
    print!("{text}");
    Ok(text)
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
