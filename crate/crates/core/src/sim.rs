//! Chunk-level discrete-event simulator of a short-video feed session.
//!
//! Every video in the queue owns its own buffer. A decision either downloads
//! the next missing chunk of one video or pauses downloading for a fixed
//! time; in both cases playback of the current video runs concurrently.
//! Playback stalls whenever the next chunk of the current video is missing,
//! and the user swipes to the next video once their watch time for the
//! current one is used up. Swiping is forward-only: whatever was buffered
//! but not played for the abandoned video is counted as waste.
//!
//! The wait for the very first chunk of the session is startup delay, not
//! rebuffering.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::RecommendationQueue;
use crate::traces::{NetworkTrace, PreferenceParams, UserTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Allowed pause lengths in seconds, ascending.
    pub pause_durations: Vec<f64>,
    /// Number of videos, starting at the current one, that may be downloaded.
    pub lookahead: usize,
    /// Past downloads kept in the throughput history.
    pub history_len: usize,
    /// Divides throughput features (Mbps).
    pub throughput_scale_mbps: f64,
    /// Divides buffer-level features (seconds).
    pub buffer_scale_s: f64,
    /// Divides the remaining-content feature (seconds).
    pub remaining_scale_s: f64,
    /// Multiplies theta before it enters the observation.
    pub theta_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pause_durations: vec![0.5, 1.0, 2.0],
            lookahead: 5,
            history_len: 5,
            throughput_scale_mbps: 5.0,
            buffer_scale_s: 10.0,
            remaining_scale_s: 60.0,
            theta_scale: 50.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pause_durations.is_empty() {
            return Err(Error::Config("pause_durations must not be empty".into()));
        }
        if self.pause_durations.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Config("pause durations must be positive".into()));
        }
        if self.pause_durations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("pause durations must be strictly ascending".into()));
        }
        if self.lookahead == 0 || self.history_len == 0 {
            return Err(Error::Config("lookahead and history_len must be positive".into()));
        }
        for (name, v) in [
            ("throughput_scale_mbps", self.throughput_scale_mbps),
            ("buffer_scale_s", self.buffer_scale_s),
            ("remaining_scale_s", self.remaining_scale_s),
            ("theta_scale", self.theta_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Length of the feature vector produced by [`observe`].
    pub fn observation_dim(&self) -> usize {
        // history + current buffer + (lookahead - 1) next buffers
        // + last level + remaining content + 4 preference weights
        self.history_len + self.lookahead + 6
    }

    pub fn min_pause(&self) -> f64 {
        self.pause_durations[0]
    }

    pub fn pause_index(&self, seconds: f64) -> Option<usize> {
        self.pause_durations.iter().position(|&d| d == seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompositeAction {
    /// Fetch the next missing chunk of the video at queue position `video`.
    Download { video: usize, level: usize },
    /// Stop downloading for `seconds`; playback continues.
    Pause { seconds: f64 },
}

impl fmt::Display for CompositeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompositeAction::Download { video, level } => write!(f, "download:v{video}:l{level}"),
            CompositeAction::Pause { seconds } => write!(f, "pause:{seconds}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferedChunk {
    pub chunk: usize,
    pub level: usize,
    pub bytes: u64,
}

/// A chunk that started playing, with the stall it caused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatchEntry {
    pub video: usize,
    pub chunk: usize,
    pub level: usize,
    /// Rebuffering spent waiting for this chunk, seconds.
    pub rebuffer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownloadRecord {
    pub video: usize,
    pub chunk: usize,
    pub level: usize,
    pub bytes: u64,
    pub start: f64,
    pub duration: f64,
}

impl DownloadRecord {
    pub fn throughput_mbps(&self) -> f64 {
        self.bytes as f64 * 8.0 / 1e6 / self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub clock: f64,
    pub current_video: usize,
    /// Seconds of content played in the current video.
    pub playhead: f64,
    pub buffers: Vec<Vec<BufferedChunk>>,
    /// Chunks of each video that have started playing.
    pub played_chunks: Vec<usize>,
    /// `min(watch duration, video length)` per video.
    pub watch_limits: Vec<f64>,
    pub rebuffer_total: f64,
    pub startup_delay: f64,
    /// Stall accrued for the chunk the player is waiting on.
    pub pending_stall: f64,
    pub downloaded_bytes: u64,
    pub wasted_bytes: u64,
    pub played_bytes: u64,
    pub watch_log: Vec<WatchEntry>,
    pub download_log: Vec<DownloadRecord>,
    pub swipes: usize,
    pub started: bool,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepOutcome {
    pub elapsed: f64,
    pub rebuffer: f64,
    pub chunks_played: usize,
    pub swipes: usize,
    pub newly_wasted_bytes: u64,
    pub terminal: bool,
}

impl SessionState {
    pub fn new(queue: &RecommendationQueue, user: &UserTrace) -> Result<Self> {
        if user.watch_durations.len() != queue.len() {
            return Err(Error::Validation(format!(
                "user trace has {} watch durations for a queue of {}",
                user.watch_durations.len(),
                queue.len()
            )));
        }
        let watch_limits = queue
            .videos()
            .iter()
            .zip(&user.watch_durations)
            .map(|(v, &w)| w.min(v.duration()))
            .collect();
        let mut state = Self {
            clock: 0.0,
            current_video: 0,
            playhead: 0.0,
            buffers: vec![Vec::new(); queue.len()],
            played_chunks: vec![0; queue.len()],
            watch_limits,
            rebuffer_total: 0.0,
            startup_delay: 0.0,
            pending_stall: 0.0,
            downloaded_bytes: 0,
            wasted_bytes: 0,
            played_bytes: 0,
            watch_log: Vec::new(),
            download_log: Vec::new(),
            swipes: 0,
            started: false,
            finished: false,
        };
        // Skip leading videos the user does not watch at all.
        let mut scratch = StepOutcome::default();
        state.advance(0.0, queue, &mut scratch);
        Ok(state)
    }

    pub fn is_terminal(&self) -> bool {
        self.finished
    }

    /// True if `video` still has chunks left to fetch.
    pub fn has_missing(&self, queue: &RecommendationQueue, video: usize) -> bool {
        queue
            .videos()
            .get(video)
            .is_some_and(|v| self.buffers[video].len() < v.num_chunks())
    }

    /// Seconds of buffered content ahead of the playhead for `video`.
    pub fn buffered_ahead(&self, queue: &RecommendationQueue, video: usize) -> f64 {
        let Some(v) = queue.videos().get(video) else {
            return 0.0;
        };
        let content = self.buffers[video].len() as f64 * v.chunk_duration;
        if video == self.current_video {
            (content - self.playhead).max(0.0)
        } else if video > self.current_video {
            content
        } else {
            0.0
        }
    }

    /// Bytes buffered but not played for videos the user has not left yet.
    pub fn residual_bytes(&self) -> u64 {
        (self.current_video..self.buffers.len())
            .map(|v| {
                self.buffers[v]
                    .iter()
                    .skip(self.played_chunks[v])
                    .map(|c| c.bytes)
                    .sum::<u64>()
            })
            .sum()
    }

    pub fn last_played_level(&self) -> Option<usize> {
        self.watch_log.last().map(|e| e.level)
    }

    fn leave_current_video(&mut self, queue: &RecommendationQueue, out: &mut StepOutcome) {
        let v = self.current_video;
        if v + 1 == queue.len() {
            // Session over; whatever is left of the last video stays residual.
            self.finished = true;
            return;
        }
        let waste: u64 = self.buffers[v]
            .iter()
            .skip(self.played_chunks[v])
            .map(|c| c.bytes)
            .sum();
        self.wasted_bytes += waste;
        out.newly_wasted_bytes += waste;
        out.swipes += 1;
        self.swipes += 1;
        self.current_video += 1;
        self.playhead = 0.0;
    }

    /// Plays for `duration` seconds of wall-clock time with buffers frozen,
    /// then settles any zero-time events (chunk starts, swipes).
    fn advance(&mut self, duration: f64, queue: &RecommendationQueue, out: &mut StepOutcome) {
        let mut remaining = duration;
        while !self.finished {
            let v = self.current_video;
            let limit = self.watch_limits[v];
            if self.playhead >= limit {
                self.leave_current_video(queue, out);
                continue;
            }
            let cd = queue.videos()[v].chunk_duration;
            let entered = self.played_chunks[v];
            let boundary = entered as f64 * cd;
            if self.playhead >= boundary {
                if let Some(chunk) = self.buffers[v].get(entered).copied() {
                    self.watch_log.push(WatchEntry {
                        video: v,
                        chunk: chunk.chunk,
                        level: chunk.level,
                        rebuffer: self.pending_stall,
                    });
                    self.pending_stall = 0.0;
                    self.played_bytes += chunk.bytes;
                    self.played_chunks[v] += 1;
                    self.started = true;
                    out.chunks_played += 1;
                    continue;
                }
                if remaining > 0.0 {
                    if self.started {
                        self.rebuffer_total += remaining;
                        self.pending_stall += remaining;
                        out.rebuffer += remaining;
                    } else {
                        self.startup_delay += remaining;
                    }
                }
                break;
            }
            if remaining <= 0.0 {
                break;
            }
            let next_event = boundary.min(limit);
            let gap = next_event - self.playhead;
            if gap <= remaining {
                self.playhead = next_event;
                remaining -= gap;
            } else {
                self.playhead += remaining;
                remaining = 0.0;
            }
        }
    }
}

/// Simulation context for one session: the queue, the user and the knobs.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub queue: &'a RecommendationQueue,
    pub user: &'a UserTrace,
    pub config: &'a SimConfig,
}

impl<'a> Env<'a> {
    pub fn new(queue: &'a RecommendationQueue, user: &'a UserTrace, config: &'a SimConfig) -> Self {
        Self { queue, user, config }
    }

    pub fn initial_state(&self) -> Result<SessionState> {
        SessionState::new(self.queue, self.user)
    }

    /// Checks an action against the current state, ignoring the lookahead window.
    pub fn check_action(&self, state: &SessionState, action: &CompositeAction) -> Result<()> {
        if state.finished {
            return Err(Error::State("session is already finished".into()));
        }
        match *action {
            CompositeAction::Download { video, level } => {
                let v = self.queue.get(video)?;
                if video < state.current_video {
                    return Err(Error::InvalidAction(format!(
                        "video {video} was already swiped away (current {})",
                        state.current_video
                    )));
                }
                if level >= v.num_levels() {
                    return Err(Error::InvalidAction(format!(
                        "level {level} outside ladder of {}",
                        v.num_levels()
                    )));
                }
                if !state.has_missing(self.queue, video) {
                    return Err(Error::InvalidAction(format!("video {video} is fully downloaded")));
                }
            }
            CompositeAction::Pause { seconds } => {
                if self.config.pause_index(seconds).is_none() {
                    return Err(Error::InvalidAction(format!(
                        "pause of {seconds}s is not in the pause set {:?}",
                        self.config.pause_durations
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies `action` in place, with `trace` driving download times.
    pub fn apply(&self, state: &mut SessionState, action: &CompositeAction, trace: &NetworkTrace) -> Result<StepOutcome> {
        self.check_action(state, action)?;
        let mut out = StepOutcome::default();
        match *action {
            CompositeAction::Download { video, level } => {
                let chunk = state.buffers[video].len();
                let bytes = self.queue.videos()[video].chunk_size(chunk, level)?;
                let duration = trace.transfer_time(state.clock, bytes);
                state.advance(duration, self.queue, &mut out);
                state.download_log.push(DownloadRecord {
                    video,
                    chunk,
                    level,
                    bytes,
                    start: state.clock,
                    duration,
                });
                state.clock += duration;
                state.buffers[video].push(BufferedChunk { chunk, level, bytes });
                state.downloaded_bytes += bytes;
                if video < state.current_video {
                    // Swiped away mid-download.
                    state.wasted_bytes += bytes;
                    out.newly_wasted_bytes += bytes;
                }
                state.advance(0.0, self.queue, &mut out);
                out.elapsed = duration;
            }
            CompositeAction::Pause { seconds } => {
                state.advance(seconds, self.queue, &mut out);
                state.clock += seconds;
                out.elapsed = seconds;
            }
        }
        out.terminal = state.finished;
        Ok(out)
    }

    /// Lets playback run for `seconds` with no download in flight. Unlike a
    /// pause action the length is arbitrary; used for what-if evaluation.
    pub fn idle(&self, state: &mut SessionState, seconds: f64) -> Result<StepOutcome> {
        if !(seconds >= 0.0) || !seconds.is_finite() {
            return Err(Error::Validation(format!("idle time must be finite and >= 0, got {seconds}")));
        }
        let mut out = StepOutcome::default();
        if !state.finished {
            state.advance(seconds, self.queue, &mut out);
            state.clock += seconds;
            out.elapsed = seconds;
        }
        out.terminal = state.finished;
        Ok(out)
    }

    /// Functional form of [`Env::apply`].
    pub fn step(
        &self,
        state: &SessionState,
        action: &CompositeAction,
        trace: &NetworkTrace,
    ) -> Result<(SessionState, StepOutcome)> {
        let mut next = state.clone();
        let out = self.apply(&mut next, action, trace)?;
        Ok((next, out))
    }

    /// Every action allowed in `state`: downloads at any level for videos in
    /// the lookahead window that still miss chunks, then every pause length.
    pub fn legal_actions(&self, state: &SessionState) -> Result<Vec<CompositeAction>> {
        if state.finished {
            return Err(Error::State("no actions in a finished session".into()));
        }
        let mut actions = Vec::new();
        for video in self.window(state) {
            if state.has_missing(self.queue, video) {
                let levels = self.queue.videos()[video].num_levels();
                actions.extend((0..levels).map(|level| CompositeAction::Download { video, level }));
            }
        }
        actions.extend(
            self.config
                .pause_durations
                .iter()
                .map(|&seconds| CompositeAction::Pause { seconds }),
        );
        Ok(actions)
    }

    /// Queue positions inside the lookahead window.
    pub fn window(&self, state: &SessionState) -> std::ops::Range<usize> {
        let end = (state.current_video + self.config.lookahead).min(self.queue.len());
        state.current_video..end
    }
}

/// Free-function form of a single simulator step.
pub fn step(
    state: &SessionState,
    action: &CompositeAction,
    trace: &NetworkTrace,
    user: &UserTrace,
    queue: &RecommendationQueue,
    config: &SimConfig,
) -> Result<(SessionState, StepOutcome)> {
    Env::new(queue, user, config).step(state, action, trace)
}

pub fn legal_actions(state: &SessionState, queue: &RecommendationQueue, user: &UserTrace, config: &SimConfig) -> Result<Vec<CompositeAction>> {
    Env::new(queue, user, config).legal_actions(state)
}

/// Measured throughput of the most recent downloads, with a cold-start prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputHistory {
    /// Oldest first, at most `history_len` entries.
    pub samples: Vec<f64>,
    pub prior_mbps: f64,
    pub capacity: usize,
}

impl ThroughputHistory {
    pub fn from_state(state: &SessionState, capacity: usize, prior_mbps: f64) -> Self {
        let skip = state.download_log.len().saturating_sub(capacity);
        Self {
            samples: state.download_log[skip..].iter().map(DownloadRecord::throughput_mbps).collect(),
            prior_mbps,
            capacity,
        }
    }

    /// Harmonic mean of the measured samples, or the prior before any download.
    pub fn estimate_mbps(&self) -> f64 {
        if self.samples.is_empty() {
            return self.prior_mbps;
        }
        self.samples.len() as f64 / self.samples.iter().map(|s| 1.0 / s).sum::<f64>()
    }

    /// Exactly `capacity` values, left-padded with the prior.
    pub fn padded(&self) -> Vec<f64> {
        let mut out = vec![self.prior_mbps; self.capacity - self.samples.len()];
        out.extend_from_slice(&self.samples);
        out
    }
}

/// Normalized controller input.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Builds the feature vector:
/// throughput history, current and next-video buffer levels, the last played
/// level, remaining content of the current video, then alpha, beta, gamma and
/// scaled theta.
pub fn observe(
    state: &SessionState,
    queue: &RecommendationQueue,
    history: &ThroughputHistory,
    prefs: &PreferenceParams,
    config: &SimConfig,
) -> Observation {
    let mut f = Vec::with_capacity(config.observation_dim());
    f.extend(history.padded().iter().map(|t| t / config.throughput_scale_mbps));
    for offset in 0..config.lookahead {
        let v = state.current_video + offset;
        f.push(state.buffered_ahead(queue, v) / config.buffer_scale_s);
    }
    let levels = queue.videos()[0].num_levels();
    f.push(state.last_played_level().map_or(0.0, |l| l as f64 / (levels - 1) as f64));
    let remaining = queue
        .videos()
        .get(state.current_video)
        .map_or(0.0, |v| (v.duration() - state.playhead).max(0.0));
    f.push(remaining / config.remaining_scale_s);
    f.extend([prefs.alpha, prefs.beta, prefs.gamma, prefs.theta * config.theta_scale]);
    debug_assert_eq!(f.len(), config.observation_dim());
    Observation { features: f }
}

/// One row of the optional per-step event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub clock: f64,
    pub action: String,
    pub elapsed: f64,
    pub rebuffer: f64,
    pub swipes: usize,
    pub downloaded_bytes: u64,
    pub wasted_bytes: u64,
}

impl EventRow {
    pub fn new(state_after: &SessionState, action: &CompositeAction, outcome: &StepOutcome) -> Self {
        Self {
            clock: state_after.clock,
            action: action.to_string(),
            elapsed: outcome.elapsed,
            rebuffer: outcome.rebuffer,
            swipes: outcome.swipes,
            downloaded_bytes: state_after.downloaded_bytes,
            wasted_bytes: state_after.wasted_bytes,
        }
    }
}

pub fn write_event_log<W: std::io::Write>(rows: &[EventRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::Video;

    fn uniform_video(id: &str, chunks: usize, size: u64) -> Video {
        Video::new(id, 2.0, vec![vec![size / 2, size]; chunks]).unwrap()
    }

    fn env_parts(videos: Vec<Video>, watch: Vec<f64>) -> (RecommendationQueue, UserTrace, SimConfig) {
        (
            RecommendationQueue::new(videos).unwrap(),
            UserTrace::new(watch).unwrap(),
            SimConfig::default(),
        )
    }

    #[test]
    fn download_time_is_size_over_bandwidth() {
        let (q, u, c) = env_parts(vec![uniform_video("a", 3, 1_000_000)], vec![6.0]);
        let env = Env::new(&q, &u, &c);
        let trace = NetworkTrace::constant(2.0).unwrap();
        let mut s = env.initial_state().unwrap();
        let out = env.apply(&mut s, &CompositeAction::Download { video: 0, level: 1 }, &trace).unwrap();
        assert_eq!(out.elapsed, 4.0);
        // Waiting for the first chunk is startup, not rebuffering.
        assert_eq!(out.rebuffer, 0.0);
        assert_eq!(s.startup_delay, 4.0);
        assert_eq!(s.downloaded_bytes, 1_000_000);
        assert_eq!(out.chunks_played, 1);
    }

    #[test]
    fn stall_equals_buffer_deficit() {
        let (q, u, c) = env_parts(vec![uniform_video("a", 4, 1_000_000)], vec![8.0]);
        let env = Env::new(&q, &u, &c);
        let fast = NetworkTrace::constant(1000.0).unwrap();
        let slow = NetworkTrace::constant(2.0).unwrap();
        let mut s = env.initial_state().unwrap();
        env.apply(&mut s, &CompositeAction::Download { video: 0, level: 1 }, &fast).unwrap();
        assert!(s.started);
        assert!((s.buffered_ahead(&q, 0) - 2.0).abs() < 1e-9);
        // 2 s buffered, 4 s download, user keeps watching.
        let out = env.apply(&mut s, &CompositeAction::Download { video: 0, level: 1 }, &slow).unwrap();
        assert!((out.rebuffer - 2.0).abs() < 1e-9, "{}", out.rebuffer);
        assert!((s.pending_stall - 0.0).abs() < 1e-12);
        assert!((s.watch_log[1].rebuffer - 2.0).abs() < 1e-9);
    }

    #[test]
    fn swipe_wastes_unplayed_chunks() {
        // Watch 6 s = 3 chunks of 2 s; 5 chunks of 250 KB buffered.
        let v0 = Video::new("a", 2.0, vec![vec![250_000, 500_000]; 5]).unwrap();
        let v1 = Video::new("b", 2.0, vec![vec![250_000, 500_000]; 5]).unwrap();
        let (q, u, c) = env_parts(vec![v0, v1], vec![6.0, 4.0]);
        let env = Env::new(&q, &u, &c);
        let fast = NetworkTrace::constant(1e6).unwrap();
        let mut s = env.initial_state().unwrap();
        for _ in 0..5 {
            env.apply(&mut s, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap();
        }
        assert_eq!(s.wasted_bytes, 0);
        let out = env.apply(&mut s, &CompositeAction::Pause { seconds: 2.0 }, &fast).unwrap();
        assert_eq!(out.swipes, 0);
        let out = env.apply(&mut s, &CompositeAction::Pause { seconds: 2.0 }, &fast).unwrap();
        assert_eq!(out.swipes, 0);
        let out = env.apply(&mut s, &CompositeAction::Pause { seconds: 2.0 }, &fast).unwrap();
        assert_eq!(out.swipes, 1);
        assert_eq!(out.newly_wasted_bytes, 500_000);
        assert_eq!(s.current_video, 1);
    }

    #[test]
    fn legal_action_counts() {
        let videos: Vec<Video> = (0..3).map(|i| Video::new(format!("v{i}"), 2.0, vec![vec![1, 2, 3, 4]; 2]).unwrap()).collect();
        let (q, u, mut c) = env_parts(videos, vec![4.0; 3]);
        c.lookahead = 2;
        let env = Env::new(&q, &u, &c);
        let s = env.initial_state().unwrap();
        assert_eq!(env.legal_actions(&s).unwrap().len(), 2 * 4 + 3);
    }

    #[test]
    fn exhausted_window_leaves_only_pauses() {
        let (q, u, c) = env_parts(vec![uniform_video("a", 1, 100)], vec![2.0]);
        let env = Env::new(&q, &u, &c);
        let mut s = env.initial_state().unwrap();
        let fast = NetworkTrace::constant(100.0).unwrap();
        env.apply(&mut s, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap();
        let acts = env.legal_actions(&s).unwrap();
        assert_eq!(acts.len(), 3);
        assert!(acts.iter().all(|a| matches!(a, CompositeAction::Pause { .. })));
        let err = env.apply(&mut s, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap_err();
        assert!(matches!(err, Error::InvalidAction(_)));
    }

    #[test]
    fn errors_on_terminal_and_bad_pause() {
        let (q, u, c) = env_parts(vec![uniform_video("a", 1, 100)], vec![2.0]);
        let env = Env::new(&q, &u, &c);
        let fast = NetworkTrace::constant(100.0).unwrap();
        let mut s = env.initial_state().unwrap();
        assert!(matches!(
            env.apply(&mut s, &CompositeAction::Pause { seconds: 0.7 }, &fast),
            Err(Error::InvalidAction(_))
        ));
        env.apply(&mut s, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap();
        let out = env.apply(&mut s, &CompositeAction::Pause { seconds: 2.0 }, &fast).unwrap();
        assert!(out.terminal);
        assert!(matches!(
            env.apply(&mut s, &CompositeAction::Pause { seconds: 2.0 }, &fast),
            Err(Error::State(_))
        ));
        assert!(matches!(env.legal_actions(&s), Err(Error::State(_))));
    }

    #[test]
    fn zero_watch_videos_are_skipped() {
        let (q, u, _) = env_parts(
            vec![uniform_video("a", 2, 100), uniform_video("b", 2, 100)],
            vec![0.0, 2.0],
        );
        let s = SessionState::new(&q, &u).unwrap();
        assert_eq!(s.current_video, 1);
        assert_eq!(s.swipes, 1);
        let (q, u, _) = env_parts(vec![uniform_video("a", 2, 100)], vec![0.0]);
        assert!(SessionState::new(&q, &u).unwrap().finished);
    }

    #[test]
    fn abandoned_in_flight_chunk_is_wasted() {
        let (q, u, c) = env_parts(
            vec![uniform_video("a", 5, 1_000_000), uniform_video("b", 5, 1_000_000)],
            vec![2.0, 10.0],
        );
        let env = Env::new(&q, &u, &c);
        let mut s = env.initial_state().unwrap();
        let fast = NetworkTrace::constant(1000.0).unwrap();
        env.apply(&mut s, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap();
        // 1 MB at 1 Mbps takes 8 s, the user leaves video 0 after 2 s.
        let slow = NetworkTrace::constant(1.0).unwrap();
        let out = env.apply(&mut s, &CompositeAction::Download { video: 0, level: 1 }, &slow).unwrap();
        assert_eq!(out.swipes, 1);
        assert_eq!(out.newly_wasted_bytes, 1_000_000);
        assert_eq!(s.downloaded_bytes, s.played_bytes + s.wasted_bytes + s.residual_bytes());
    }

    #[test]
    fn fresh_observation_uses_prior() {
        let (q, u, c) = env_parts(vec![uniform_video("a", 3, 100), uniform_video("b", 3, 100)], vec![6.0, 6.0]);
        let s = SessionState::new(&q, &u).unwrap();
        let h = ThroughputHistory::from_state(&s, c.history_len, 2.25);
        let o = observe(&s, &q, &h, &PreferenceParams::default(), &c);
        assert_eq!(o.dim(), c.observation_dim());
        assert!(o.features[..5].iter().all(|&x| x == 2.25 / 5.0));
        assert!(o.features[5..10].iter().all(|&x| x == 0.0));
        assert_eq!(h.estimate_mbps(), 2.25);
    }

    #[test]
    fn event_log_has_expected_header() {
        let (q, u, c) = env_parts(vec![uniform_video("a", 2, 1000)], vec![4.0]);
        let env = Env::new(&q, &u, &c);
        let mut s = env.initial_state().unwrap();
        let a = CompositeAction::Download { video: 0, level: 0 };
        let o = env.apply(&mut s, &a, &NetworkTrace::constant(1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_event_log(&[EventRow::new(&s, &a, &o)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("clock,action,elapsed,rebuffer,swipes,downloaded_bytes,wasted_bytes\n"));
        assert!(text.contains("download:v0:l0"));
    }
}
