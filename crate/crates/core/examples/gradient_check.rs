// Compare the analytic loss gradients with central finite differences.

use feedflow::gfn::{fm_gradient, fm_loss, tb_gradient, tb_loss_log, FlowModel, ToyTree};
use feedflow::rng::stream_rng;

fn numeric(model: &FlowModel, f: impl Fn(&FlowModel) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut m = model.clone();
    let mut g = Vec::with_capacity(model.gradient_len());
    for i in 0..m.num_params() {
        let x = m.params()[i];
        m.params_mut()[i] = x + h;
        let up = f(&m);
        m.params_mut()[i] = x - h;
        let down = f(&m);
        m.params_mut()[i] = x;
        g.push((up - down) / (2.0 * h));
    }
    let z = m.log_z;
    m.log_z = z + h;
    let up = f(&m);
    m.log_z = z - h;
    g.push((up - f(&m)) / (2.0 * h));
    g
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |it: &mut dyn Iterator<Item = f64>| it.map(|x| x * x).sum::<f64>().sqrt();
    let d = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    d / norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(f64::MIN_POSITIVE)
}

pub fn run_example() -> feedflow::Result<(f64, f64)> {
    let mut rng = stream_rng(3, 0);
    let tree = ToyTree::random(20, 3, 4, &mut rng)?;
    let mut model = FlowModel::random(&[tree.num_nodes(), 8, tree.max_branch()], 1.0, &mut rng)?;
    model.log_z = 0.5;

    let batch = tree.enumerate_trajectories();
    let tb = tb_gradient(&model, &tree, &batch)?;
    let tb_num = numeric(&model, |m| {
        let total: f64 = batch.iter().map(|e| tb_loss_log(m, &tree, &e.states, e.log_reward).unwrap()).sum();
        total / batch.len() as f64
    });

    let states = tree.non_root_states();
    let reward = tree.reward_fn();
    let fm = fm_gradient(&model, &tree, &states, &reward)?;
    let fm_num = numeric(&model, |m| fm_loss(m, &tree, &states, &reward).unwrap());

    let errs = (rel_err(&tb.grad, &tb_num), rel_err(&fm.grad, &fm_num));
    println!("{} parameters plus log Z", model.num_params());
    println!("TB loss {:.4}, gradient relative error {:.2e}", tb.loss, errs.0);
    println!("FM loss {:.4}, gradient relative error {:.2e}", fm.loss, errs.1);
    Ok(errs)
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
