//! Generative flow network core: decision DAGs, the parametric edge-flow
//! model, policies, training losses with analytic gradients, and Adam.

pub mod dag;
pub mod loss;
pub mod model;
pub mod optim;
pub mod policy;
pub mod toy;

pub use dag::FlowDag;
pub use loss::{
    db_residual, fm_gradient, fm_loss, fm_residual, gradient, tb_gradient, tb_loss, tb_loss_log, tb_residual, Batch,
    LossGradient, LossKind, TbExample,
};
pub use model::{Checkpoint, FlowModel, ForwardCache};
pub use optim::{Adam, AdamConfig};
pub use policy::{
    backward_policy, edge_log_flows, forward_policy, sample_candidates, sample_trajectory, Candidate,
    SampledTrajectory,
};
pub use toy::{train_tb, ToyTraining, ToyTrainingReport, ToyTree};
