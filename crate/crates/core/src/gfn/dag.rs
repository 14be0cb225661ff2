use std::fmt::Debug;

/// A rooted decision DAG whose edges are scored by a [`FlowModel`] head.
///
/// Terminal states are exactly those without children; each terminal
/// carries the object it constructs.
///
/// [`FlowModel`]: super::FlowModel
pub trait FlowDag {
    type State: Clone + PartialEq + Debug;
    type Object: Clone + PartialEq + Debug;

    fn root(&self) -> Self::State;

    /// Children of `state`, each paired with the model output head that
    /// scores the edge. Empty iff `state` is terminal.
    fn children(&self, state: &Self::State) -> Vec<(usize, Self::State)>;

    /// Parents of `state` (empty for the root).
    fn parents(&self, state: &Self::State) -> Vec<Self::State>;

    /// Model input for evaluating the edges leaving `state`.
    fn features(&self, state: &Self::State) -> Vec<f64>;

    /// Object built at a terminal state.
    fn object(&self, state: &Self::State) -> Option<Self::Object>;

    fn is_terminal(&self, state: &Self::State) -> bool {
        self.children(state).is_empty()
    }
}
