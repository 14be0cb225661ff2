// Train a flow model with trajectory balance on a small tree and check
// that sampled terminals appear in proportion to their rewards.

use feedflow::gfn::{sample_trajectory, train_tb, ToyTraining, ToyTree};
use feedflow::rng::stream_rng;

pub fn run_example() -> feedflow::Result<f64> {
    let rewards = [1.0, 2.0, 3.0, 4.0];
    let tree = ToyTree::star(&rewards)?;
    let (model, report) = train_tb(&tree, &ToyTraining::default())?;
    println!(
        "trained in {} steps: max TB loss {:.2e}, total variation {:.2e}, log Z {:.4} (ln 10 = {:.4})",
        report.steps,
        report.max_loss,
        report.total_variation,
        model.log_z,
        10f64.ln()
    );

    let draws = 10_000;
    let mut counts = vec![0usize; tree.num_nodes()];
    let mut rng = stream_rng(7, 0);
    for _ in 0..draws {
        counts[*sample_trajectory(&model, &tree, &mut rng)?.terminal()] += 1;
    }
    let mut worst: f64 = 0.0;
    for t in tree.terminals() {
        let target = tree.reward(t).unwrap_or(0.0) / tree.total_reward();
        let seen = counts[t] as f64 / draws as f64;
        worst = worst.max((seen - target).abs());
        println!("terminal {t}: target {target:.3}, sampled {seen:.3}");
    }
    Ok(worst)
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
