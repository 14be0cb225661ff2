use rand::Rng;

use super::dag::FlowDag;
use super::model::FlowModel;
use crate::error::{Error, Result};

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Children of `state` with their log edge flows `log F(s -> s')`.
pub fn edge_log_flows<D: FlowDag>(
    model: &FlowModel,
    dag: &D,
    state: &D::State,
) -> Result<(Vec<(usize, D::State)>, Vec<f64>)> {
    let children = dag.children(state);
    if children.is_empty() {
        return Ok((children, Vec::new()));
    }
    let out = model.outputs(&dag.features(state))?;
    let flows = children
        .iter()
        .map(|(head, _)| {
            out.get(*head).copied().ok_or(Error::Index {
                what: "model head",
                index: *head,
                len: out.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((children, flows))
}

/// `P_F(s' | s) = F(s -> s') / sum over s'' of F(s -> s'')`.
pub fn forward_policy<D: FlowDag>(model: &FlowModel, dag: &D, state: &D::State) -> Result<Vec<(D::State, f64)>> {
    let (children, flows) = edge_log_flows(model, dag, state)?;
    if children.is_empty() {
        return Err(Error::State(format!("forward policy at terminal state {state:?}")));
    }
    Ok(children.into_iter().map(|(_, c)| c).zip(softmax(&flows)).collect())
}

/// Fixed backward policy, uniform over parents. On a tree every state has a
/// single parent, so this puts probability 1 on it.
pub fn backward_policy<D: FlowDag>(dag: &D, state: &D::State) -> Result<Vec<(D::State, f64)>> {
    let parents = dag.parents(state);
    if parents.is_empty() {
        return Err(Error::State("backward policy at the root".into()));
    }
    let p = 1.0 / parents.len() as f64;
    Ok(parents.into_iter().map(|s| (s, p)).collect())
}

pub(crate) fn log_backward_prob<D: FlowDag>(dag: &D, parent: &D::State, child: &D::State) -> Result<f64> {
    let pb = backward_policy(dag, child)?;
    pb.iter()
        .find(|(s, _)| s == parent)
        .map(|(_, p)| p.ln())
        .ok_or_else(|| Error::Validation(format!("{parent:?} is not a parent of {child:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory<S> {
    /// `s0, ..., sn`, ending at a terminal state.
    pub states: Vec<S>,
    /// Index into `children(s_t)` of the edge taken at each step.
    pub choices: Vec<usize>,
    /// `log P_F(s_{t+1} | s_t)` at sampling time.
    pub log_pf: Vec<f64>,
}

impl<S> SampledTrajectory<S> {
    pub fn terminal(&self) -> &S {
        self.states.last().expect("trajectory has at least the root")
    }

    pub fn log_prob(&self) -> f64 {
        self.log_pf.iter().sum()
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Walks from the root to a terminal state following `P_F`.
pub fn sample_trajectory<D: FlowDag, R: Rng + ?Sized>(
    model: &FlowModel,
    dag: &D,
    rng: &mut R,
) -> Result<SampledTrajectory<D::State>> {
    let mut state = dag.root();
    let mut traj = SampledTrajectory {
        states: vec![state.clone()],
        choices: Vec::new(),
        log_pf: Vec::new(),
    };
    loop {
        let (mut children, flows) = edge_log_flows(model, dag, &state)?;
        if children.is_empty() {
            return Ok(traj);
        }
        let lse = log_sum_exp(&flows);
        let probs: Vec<f64> = flows.iter().map(|f| (f - lse).exp()).collect();
        let k = sample_index(&probs, rng);
        traj.choices.push(k);
        traj.log_pf.push(flows[k] - lse);
        state = children.swap_remove(k).1;
        traj.states.push(state.clone());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<S, O> {
    pub object: O,
    pub trajectory: SampledTrajectory<S>,
}

/// Up to `k` distinct terminal objects, from at most `5k` sampled
/// trajectories, ranked by descending trajectory log-probability (ties keep
/// sampling order).
pub fn sample_candidates<D: FlowDag, R: Rng + ?Sized>(
    model: &FlowModel,
    dag: &D,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Candidate<D::State, D::Object>>> {
    if k == 0 {
        return Err(Error::Config("candidate count must be at least 1".into()));
    }
    let mut out: Vec<Candidate<D::State, D::Object>> = Vec::with_capacity(k);
    for _ in 0..5 * k {
        let trajectory = sample_trajectory(model, dag, rng)?;
        let object = dag
            .object(trajectory.terminal())
            .ok_or_else(|| Error::State("terminal state without an object".into()))?;
        if !out.iter().any(|c| c.object == object) {
            out.push(Candidate { object, trajectory });
            if out.len() == k {
                break;
            }
        }
    }
    out.sort_by(|a, b| b.trajectory.log_prob().total_cmp(&a.trajectory.log_prob()));
    Ok(out)
}
