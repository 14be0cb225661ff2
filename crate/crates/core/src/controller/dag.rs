use crate::gfn::FlowDag;
use crate::media::RecommendationQueue;
use crate::sim::{CompositeAction, Observation, SessionState, SimConfig};

/// Position in the per-decision tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DagState {
    Root,
    /// A video at `offset` from the current one has been picked; the level is open.
    Video { offset: usize },
    Pause { index: usize },
    Download { offset: usize, level: usize },
}

/// Two-stage decision tree for one controller step.
///
/// The root offers every pause length and every video in the lookahead
/// window that still has chunks to fetch; picking a video leads to a choice
/// of ladder level. Model heads are laid out as
/// `[pauses | video offsets | levels]`, and the model input is the
/// observation followed by a root flag and a one-hot of the picked offset.
#[derive(Debug, Clone)]
pub struct FeedsDag {
    obs: Vec<f64>,
    current_video: usize,
    pauses: Vec<f64>,
    downloadable: Vec<bool>,
    levels: usize,
}

impl FeedsDag {
    pub fn new(obs: &Observation, state: &SessionState, queue: &RecommendationQueue, config: &SimConfig) -> Self {
        let downloadable = (0..config.lookahead)
            .map(|o| state.has_missing(queue, state.current_video + o))
            .collect();
        Self {
            obs: obs.features.clone(),
            current_video: state.current_video,
            pauses: config.pause_durations.clone(),
            downloadable,
            levels: queue.videos()[0].num_levels(),
        }
    }

    /// Model input width for a given simulator configuration.
    pub fn input_dim(config: &SimConfig) -> usize {
        config.observation_dim() + config.lookahead + 1
    }

    /// Model output width (number of heads).
    pub fn output_dim(config: &SimConfig, levels: usize) -> usize {
        config.pause_durations.len() + config.lookahead + levels
    }

    fn window(&self) -> usize {
        self.downloadable.len()
    }

    /// Terminal state that builds `action`, if the action is in this tree.
    pub fn terminal_for(&self, action: &CompositeAction) -> Option<DagState> {
        match *action {
            CompositeAction::Pause { seconds } => self
                .pauses
                .iter()
                .position(|&p| p == seconds)
                .map(|index| DagState::Pause { index }),
            CompositeAction::Download { video, level } => {
                let offset = video.checked_sub(self.current_video)?;
                (offset < self.window() && self.downloadable[offset] && level < self.levels)
                    .then_some(DagState::Download { offset, level })
            }
        }
    }

    /// Root-to-terminal path for `action`.
    pub fn path_to(&self, action: &CompositeAction) -> Option<Vec<DagState>> {
        let t = self.terminal_for(action)?;
        Some(match t {
            DagState::Download { offset, .. } => vec![DagState::Root, DagState::Video { offset }, t],
            _ => vec![DagState::Root, t],
        })
    }
}

impl FlowDag for FeedsDag {
    type State = DagState;
    type Object = CompositeAction;

    fn root(&self) -> DagState {
        DagState::Root
    }

    fn children(&self, state: &DagState) -> Vec<(usize, DagState)> {
        let p = self.pauses.len();
        match *state {
            DagState::Root => {
                let mut out: Vec<_> = (0..p).map(|index| (index, DagState::Pause { index })).collect();
                out.extend(
                    (0..self.window())
                        .filter(|&o| self.downloadable[o])
                        .map(|offset| (p + offset, DagState::Video { offset })),
                );
                out
            }
            DagState::Video { offset } => (0..self.levels)
                .map(|level| (p + self.window() + level, DagState::Download { offset, level }))
                .collect(),
            DagState::Pause { .. } | DagState::Download { .. } => Vec::new(),
        }
    }

    fn parents(&self, state: &DagState) -> Vec<DagState> {
        match *state {
            DagState::Root => Vec::new(),
            DagState::Video { .. } | DagState::Pause { .. } => vec![DagState::Root],
            DagState::Download { offset, .. } => vec![DagState::Video { offset }],
        }
    }

    fn features(&self, state: &DagState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.obs.len() + self.window() + 1);
        x.extend_from_slice(&self.obs);
        let mut enc = vec![0.0; self.window() + 1];
        match *state {
            DagState::Root => enc[0] = 1.0,
            DagState::Video { offset } | DagState::Download { offset, .. } => enc[1 + offset] = 1.0,
            DagState::Pause { .. } => {}
        }
        x.extend(enc);
        x
    }

    fn object(&self, state: &DagState) -> Option<CompositeAction> {
        match *state {
            DagState::Pause { index } => Some(CompositeAction::Pause {
                seconds: self.pauses[index],
            }),
            DagState::Download { offset, level } => Some(CompositeAction::Download {
                video: self.current_video + offset,
                level,
            }),
            _ => None,
        }
    }
}
