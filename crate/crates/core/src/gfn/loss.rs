//! Flow-matching, trajectory-balance and detailed-balance objectives, with
//! analytic gradients over `(model parameters, log_z)`.
//!
//! Gradient vectors have length `model.gradient_len()`; the last entry is
//! the derivative with respect to `log_z`.

use super::dag::FlowDag;
use super::model::FlowModel;
use super::policy::{edge_log_flows, log_backward_prob, log_sum_exp, softmax};
use crate::error::{Error, Result};

fn checked_log(reward: f64) -> Result<f64> {
    if !(reward > 0.0) || !reward.is_finite() {
        return Err(Error::Domain(format!("reward must be positive and finite, got {reward}")));
    }
    Ok(reward.ln())
}

fn child_position<S: PartialEq + std::fmt::Debug>(children: &[(usize, S)], child: &S) -> Result<usize> {
    children
        .iter()
        .position(|(_, c)| c == child)
        .ok_or_else(|| Error::Validation(format!("{child:?} is not a child of the given state")))
}

/// Signed trajectory-balance residual
/// `log Z + sum log P_F - log R(x) - sum log P_B`.
pub fn tb_residual<D: FlowDag>(model: &FlowModel, dag: &D, states: &[D::State], log_reward: f64) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::Validation("trajectory needs at least one transition".into()));
    }
    let mut r = model.log_z - log_reward;
    for pair in states.windows(2) {
        let (children, flows) = edge_log_flows(model, dag, &pair[0])?;
        let k = child_position(&children, &pair[1])?;
        r += flows[k] - log_sum_exp(&flows);
        r -= log_backward_prob(dag, &pair[0], &pair[1])?;
    }
    Ok(r)
}

/// Squared trajectory-balance residual for a trajectory ending in a terminal
/// with the given (positive) reward.
pub fn tb_loss<D: FlowDag>(model: &FlowModel, dag: &D, states: &[D::State], reward: f64) -> Result<f64> {
    let r = tb_residual(model, dag, states, checked_log(reward)?)?;
    Ok(r * r)
}

/// [`tb_loss`] with the reward given in log space.
pub fn tb_loss_log<D: FlowDag>(model: &FlowModel, dag: &D, states: &[D::State], log_reward: f64) -> Result<f64> {
    let r = tb_residual(model, dag, states, log_reward)?;
    Ok(r * r)
}

/// Log in-flow of a non-root state: `log sum over parents p of F(p -> s)`.
fn log_inflow<D: FlowDag>(model: &FlowModel, dag: &D, state: &D::State) -> Result<f64> {
    let parents = dag.parents(state);
    if parents.is_empty() {
        return Err(Error::Validation("the root has no in-flow".into()));
    }
    let mut incoming = Vec::with_capacity(parents.len());
    for p in &parents {
        let (children, flows) = edge_log_flows(model, dag, p)?;
        incoming.push(flows[child_position(&children, state)?]);
    }
    Ok(log_sum_exp(&incoming))
}

/// Log out-flow: the log-sum of outgoing edge flows, or `log R` at a terminal.
fn log_outflow<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    state: &D::State,
    reward: &dyn Fn(&D::State) -> f64,
) -> Result<f64> {
    let (children, flows) = edge_log_flows(model, dag, state)?;
    if children.is_empty() {
        checked_log(reward(state))
    } else {
        Ok(log_sum_exp(&flows))
    }
}

/// Signed flow-matching residual `log in-flow - log out-flow` at a non-root state.
pub fn fm_residual<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    state: &D::State,
    reward: &dyn Fn(&D::State) -> f64,
) -> Result<f64> {
    Ok(log_inflow(model, dag, state)? - log_outflow(model, dag, state, reward)?)
}

/// Mean squared flow-matching residual over a batch of non-root states.
pub fn fm_loss<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    states: &[D::State],
    reward: &dyn Fn(&D::State) -> f64,
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Validation("empty flow-matching batch".into()));
    }
    let mut total = 0.0;
    for s in states {
        let r = fm_residual(model, dag, s, reward)?;
        total += r * r;
    }
    Ok(total / states.len() as f64)
}

/// Detailed-balance residual for the transition `parent -> child`:
/// `log F(s) + log P_F(s'|s) - log F(s') - log P_B(s|s')`, where `F(s)` is
/// the out-flow of `s` and `F(x) = R(x)` at a terminal.
pub fn db_residual<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    parent: &D::State,
    child: &D::State,
    reward: &dyn Fn(&D::State) -> f64,
) -> Result<f64> {
    let (children, flows) = edge_log_flows(model, dag, parent)?;
    if children.is_empty() {
        return Err(Error::State(format!("{parent:?} is terminal")));
    }
    let k = child_position(&children, child)?;
    // log F(s) + log P_F(s'|s) collapses to the edge flow.
    let edge = flows[k];
    Ok(edge - log_outflow(model, dag, child, reward)? - log_backward_prob(dag, parent, child)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    /// `d loss / d params`, then `d loss / d log_z`.
    pub grad: Vec<f64>,
}

impl LossGradient {
    pub fn norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Adds `d(loss)/d(flows at state) = d_flows` into `grad` by backpropagation.
fn backprop_flows<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    state: &D::State,
    heads: &[usize],
    d_flows: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    let cache = model.forward(&dag.features(state))?;
    let mut d_out = vec![0.0; model.output_dim()];
    for (&h, &d) in heads.iter().zip(d_flows) {
        d_out[h] += d;
    }
    model.backward(&cache, &d_out, grad);
    Ok(())
}

/// One trajectory-balance example: a root-to-terminal state sequence and
/// the terminal's log reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TbExample<S> {
    pub states: Vec<S>,
    pub log_reward: f64,
}

/// Mean trajectory-balance loss over `batch` and its analytic gradient.
pub fn tb_gradient<D: FlowDag>(model: &FlowModel, dag: &D, batch: &[TbExample<D::State>]) -> Result<LossGradient> {
    if batch.is_empty() {
        return Err(Error::Validation("empty trajectory batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; model.gradient_len()];
    let mut loss = 0.0;
    for ex in batch {
        if ex.states.len() < 2 {
            return Err(Error::Validation("trajectory needs at least one transition".into()));
        }
        let mut r = model.log_z - ex.log_reward;
        let mut steps = Vec::with_capacity(ex.states.len() - 1);
        for pair in ex.states.windows(2) {
            let (children, flows) = edge_log_flows(model, dag, &pair[0])?;
            let k = child_position(&children, &pair[1])?;
            r += flows[k] - log_sum_exp(&flows);
            r -= log_backward_prob(dag, &pair[0], &pair[1])?;
            let heads: Vec<usize> = children.iter().map(|(h, _)| *h).collect();
            steps.push((heads, softmax(&flows), k));
        }
        loss += scale * r * r;
        let coeff = 2.0 * r * scale;
        *grad.last_mut().expect("log_z slot") += coeff;
        for ((heads, probs, k), s) in steps.iter().zip(&ex.states) {
            // d log P_F(c|s) / d flow_j = [j == c] - P_F(j|s)
            let d: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(j, p)| coeff * (if j == *k { 1.0 } else { 0.0 } - p))
                .collect();
            backprop_flows(model, dag, s, heads, &d, &mut grad)?;
        }
    }
    Ok(LossGradient { loss, grad })
}

/// Mean flow-matching loss over non-root `states` and its analytic gradient.
pub fn fm_gradient<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    states: &[D::State],
    reward: &dyn Fn(&D::State) -> f64,
) -> Result<LossGradient> {
    if states.is_empty() {
        return Err(Error::Validation("empty flow-matching batch".into()));
    }
    let scale = 1.0 / states.len() as f64;
    let mut grad = vec![0.0; model.gradient_len()];
    let mut loss = 0.0;
    for s in states {
        let parents = dag.parents(s);
        if parents.is_empty() {
            return Err(Error::Validation("the root has no in-flow".into()));
        }
        let mut incoming = Vec::with_capacity(parents.len());
        let mut parent_edges = Vec::with_capacity(parents.len());
        for p in &parents {
            let (children, flows) = edge_log_flows(model, dag, p)?;
            let k = child_position(&children, s)?;
            incoming.push(flows[k]);
            parent_edges.push(children[k].0);
        }
        let log_in = log_sum_exp(&incoming);
        let (children, flows) = edge_log_flows(model, dag, s)?;
        let log_out = if children.is_empty() {
            checked_log(reward(s))?
        } else {
            log_sum_exp(&flows)
        };
        let r = log_in - log_out;
        loss += scale * r * r;
        let coeff = 2.0 * r * scale;
        for ((p, &head), w) in parents.iter().zip(&parent_edges).zip(softmax(&incoming)) {
            backprop_flows(model, dag, p, &[head], &[coeff * w], &mut grad)?;
        }
        if !children.is_empty() {
            let heads: Vec<usize> = children.iter().map(|(h, _)| *h).collect();
            let d: Vec<f64> = softmax(&flows).iter().map(|p| -coeff * p).collect();
            backprop_flows(model, dag, s, &heads, &d, &mut grad)?;
        }
    }
    Ok(LossGradient { loss, grad })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    FlowMatching,
    TrajectoryBalance,
}

/// Training batch for either objective.
pub enum Batch<'a, D: FlowDag> {
    States {
        states: &'a [D::State],
        reward: &'a dyn Fn(&D::State) -> f64,
    },
    Trajectories(&'a [TbExample<D::State>]),
}

impl<D: FlowDag> Batch<'_, D> {
    pub fn kind(&self) -> LossKind {
        match self {
            Batch::States { .. } => LossKind::FlowMatching,
            Batch::Trajectories(_) => LossKind::TrajectoryBalance,
        }
    }
}

/// Loss and analytic gradient for whichever objective the batch feeds.
pub fn gradient<D: FlowDag>(model: &FlowModel, dag: &D, batch: &Batch<'_, D>) -> Result<LossGradient> {
    match batch {
        Batch::States { states, reward } => fm_gradient(model, dag, states, *reward),
        Batch::Trajectories(examples) => tb_gradient(model, dag, examples),
    }
}
