// Run the buffer-threshold baseline over the bundled demo scenarios.

use feedflow::controller::{episode_rng, run_episode, PolicyKind};
use feedflow::dataset::{build_scenarios, ClassCounts};
use feedflow::gfn::FlowModel;
use feedflow::harness::ExperimentConfig;
use feedflow::traces::BandwidthClass;

pub fn run_example() -> feedflow::Result<Vec<(BandwidthClass, f64, f64)>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo.toml");
    let mut cfg = ExperimentConfig::load(path.as_ref())?;
    let ds = cfg.load_dataset()?;
    cfg.scenarios.per_class = ClassCounts { low: 3, medium: 3, high: 3 };
    let scenarios = build_scenarios(&ds, &cfg.scenarios)?;

    let policy = PolicyKind::RuleBased(cfg.controller.rule);
    let unused = FlowModel::zeros(&cfg.controller.layers())?;
    let mut out = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let r = run_episode(&policy, &unused, s, &cfg.controller, &mut episode_rng(0, i))?;
        println!(
            "{:<11} objective {:>8.2}  rebuffer {:>6.2}s  {:>6.2} MB  {:>5.1}% wasted  {} decisions",
            s.id,
            r.metrics.objective,
            r.metrics.terms.rebuffer_sum,
            r.metrics.bandwidth_mb,
            100.0 * r.metrics.wastage_fraction,
            r.decisions.len()
        );
        out.push((s.class, r.metrics.objective, r.metrics.terms.rebuffer_sum));
    }
    Ok(out)
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
