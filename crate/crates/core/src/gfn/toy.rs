//! Small enumerable trees for exercising the GFlowNet machinery.
//!
//! States are node indices and the model sees a one-hot node encoding, so a
//! single linear layer `[n_nodes, max_branch]` is a lookup table of edge
//! flows: weight `(head, node)` is the log-flow of the `head`-th child.

use rand::Rng;

use super::dag::FlowDag;
use super::loss::{tb_gradient, tb_loss_log, TbExample};
use super::model::FlowModel;
use super::optim::{Adam, AdamConfig};
use super::policy::forward_policy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parent: Option<usize>,
    children: Vec<usize>,
    reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTree {
    nodes: Vec<Node>,
    max_branch: usize,
}

impl ToyTree {
    /// Root with one terminal child per reward.
    pub fn star(rewards: &[f64]) -> Result<Self> {
        if rewards.is_empty() {
            return Err(Error::Validation("a tree needs at least one terminal".into()));
        }
        let mut nodes = vec![Node {
            parent: None,
            children: (1..=rewards.len()).collect(),
            reward: None,
        }];
        for &r in rewards {
            if !(r > 0.0) {
                return Err(Error::Domain(format!("reward must be positive, got {r}")));
            }
            nodes.push(Node {
                parent: Some(0),
                children: Vec::new(),
                reward: Some(r),
            });
        }
        Ok(Self {
            nodes,
            max_branch: rewards.len(),
        })
    }

    /// Random tree with at most `max_terminals` leaves, branching factors in
    /// `2..=max_branch`, depth at most `max_depth`, and rewards drawn
    /// uniformly from `[0.1, 10]`.
    pub fn random<R: Rng + ?Sized>(max_terminals: usize, max_branch: usize, max_depth: usize, rng: &mut R) -> Result<Self> {
        if max_terminals < 2 || max_branch < 2 || max_depth < 1 {
            return Err(Error::Config("random trees need max_terminals, max_branch >= 2 and max_depth >= 1".into()));
        }
        let mut nodes = vec![Node {
            parent: None,
            children: Vec::new(),
            reward: None,
        }];
        let mut depth = vec![0usize];
        let mut leaves = 1usize;
        let mut frontier = vec![0usize];
        let target = rng.random_range(max_terminals / 2..=max_terminals).max(2);
        while !frontier.is_empty() {
            let pick = rng.random_range(0..frontier.len());
            let node = frontier.swap_remove(pick);
            let room = max_terminals - leaves + 1;
            let b = rng.random_range(2..=max_branch).min(room);
            if b < 2 || (node != 0 && leaves >= target) {
                continue;
            }
            leaves += b - 1;
            for _ in 0..b {
                let id = nodes.len();
                nodes.push(Node {
                    parent: Some(node),
                    children: Vec::new(),
                    reward: None,
                });
                depth.push(depth[node] + 1);
                nodes[node].children.push(id);
                if depth[id] < max_depth {
                    frontier.push(id);
                }
            }
        }
        for n in nodes.iter_mut().filter(|n| n.children.is_empty()) {
            n.reward = Some(rng.random_range(0.1..=10.0));
        }
        Ok(Self { nodes, max_branch })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_branch(&self) -> usize {
        self.max_branch
    }

    /// Layer sizes of the tabular model for this tree.
    pub fn layers(&self) -> Vec<usize> {
        vec![self.nodes.len(), self.max_branch]
    }

    pub fn terminals(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty()).collect()
    }

    pub fn reward(&self, node: usize) -> Option<f64> {
        self.nodes.get(node).and_then(|n| n.reward)
    }

    /// Reward function suitable for the loss helpers; 0 off the terminals.
    pub fn reward_fn(&self) -> impl Fn(&usize) -> f64 + '_ {
        move |s| self.reward(*s).unwrap_or(0.0)
    }

    pub fn total_reward(&self) -> f64 {
        self.terminals().iter().filter_map(|&t| self.reward(t)).sum()
    }

    /// Sum of terminal rewards below `node`.
    pub fn subtree_reward(&self, node: usize) -> f64 {
        let n = &self.nodes[node];
        match n.reward {
            Some(r) => r,
            None => n.children.iter().map(|&c| self.subtree_reward(c)).sum(),
        }
    }

    /// Root-to-terminal path for `terminal`.
    pub fn path_to(&self, terminal: usize) -> Vec<usize> {
        let mut path = vec![terminal];
        let mut cur = terminal;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Every complete trajectory with its terminal's log reward.
    pub fn enumerate_trajectories(&self) -> Vec<TbExample<usize>> {
        self.terminals()
            .into_iter()
            .map(|t| TbExample {
                states: self.path_to(t),
                log_reward: self.reward(t).expect("terminal has a reward").ln(),
            })
            .collect()
    }

    /// All states other than the root.
    pub fn non_root_states(&self) -> Vec<usize> {
        (1..self.nodes.len()).collect()
    }

    /// Transitions `(parent, child)` of the tree.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        (1..self.nodes.len())
            .map(|c| (self.nodes[c].parent.expect("non-root has a parent"), c))
            .collect()
    }

    /// Flows satisfying detailed balance exactly: each edge carries the
    /// reward mass of the subtree below it and `log Z = log sum R`.
    pub fn consistent_model(&self) -> FlowModel {
        let mut model = FlowModel::zeros(&self.layers()).expect("valid layers");
        for (i, n) in self.nodes.iter().enumerate() {
            for (head, &c) in n.children.iter().enumerate() {
                model.set_weight(0, head, i, self.subtree_reward(c).ln());
            }
        }
        model.log_z = self.total_reward().ln();
        model
    }

    /// Probability of reaching each terminal by following `P_F` from the root,
    /// keyed by terminal node in ascending order.
    pub fn exact_terminal_distribution(&self, model: &FlowModel) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((s, p)) = stack.pop() {
            if self.nodes[s].children.is_empty() {
                out.push((s, p));
                continue;
            }
            for (c, q) in forward_policy(model, self, &s)? {
                stack.push((c, p * q));
            }
        }
        out.sort_by_key(|&(s, _)| s);
        Ok(out)
    }

    /// Total-variation distance between the model's terminal distribution
    /// and `R(x) / sum R`.
    pub fn tv_to_target(&self, model: &FlowModel) -> Result<f64> {
        let z = self.total_reward();
        let dist = self.exact_terminal_distribution(model)?;
        Ok(0.5
            * dist
                .iter()
                .map(|&(t, p)| (p - self.reward(t).unwrap_or(0.0) / z).abs())
                .sum::<f64>())
    }

    /// Largest per-trajectory TB loss.
    pub fn max_tb_loss(&self, model: &FlowModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for ex in self.enumerate_trajectories() {
            worst = worst.max(tb_loss_log(model, self, &ex.states, ex.log_reward)?);
        }
        Ok(worst)
    }
}

impl FlowDag for ToyTree {
    type State = usize;
    type Object = usize;

    fn root(&self) -> usize {
        0
    }

    fn children(&self, state: &usize) -> Vec<(usize, usize)> {
        self.nodes[*state].children.iter().copied().enumerate().collect()
    }

    fn parents(&self, state: &usize) -> Vec<usize> {
        self.nodes[*state].parent.into_iter().collect()
    }

    fn features(&self, state: &usize) -> Vec<f64> {
        let mut x = vec![0.0; self.nodes.len()];
        x[*state] = 1.0;
        x
    }

    fn object(&self, state: &usize) -> Option<usize> {
        self.nodes[*state].children.is_empty().then_some(*state)
    }
}

/// Settings for full-batch TB training on a toy tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyTraining {
    pub max_steps: usize,
    pub adam: AdamConfig,
    /// Stop once every trajectory's TB loss is below this.
    pub tolerance: f64,
}

impl Default for ToyTraining {
    fn default() -> Self {
        Self {
            max_steps: 5000,
            adam: AdamConfig {
                lr: 0.05,
                ..AdamConfig::default()
            },
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainingReport {
    pub steps: usize,
    pub max_loss: f64,
    pub total_variation: f64,
}

/// Trains a zero-initialized tabular model with trajectory balance over all
/// of the tree's trajectories at once.
pub fn train_tb(tree: &ToyTree, settings: &ToyTraining) -> Result<(FlowModel, ToyTrainingReport)> {
    let mut model = FlowModel::zeros(&tree.layers())?;
    let mut opt = Adam::new(&model, settings.adam);
    let batch = tree.enumerate_trajectories();
    let mut steps = 0;
    let mut max_loss = tree.max_tb_loss(&model)?;
    while steps < settings.max_steps && max_loss >= settings.tolerance {
        let g = tb_gradient(&model, tree, &batch)?;
        opt.update(&mut model, &g.grad)?;
        steps += 1;
        if steps % 25 == 0 {
            max_loss = tree.max_tb_loss(&model)?;
        }
    }
    max_loss = tree.max_tb_loss(&model)?;
    let total_variation = tree.tv_to_target(&model)?;
    Ok((
        model,
        ToyTrainingReport {
            steps,
            max_loss,
            total_variation,
        },
    ))
}
