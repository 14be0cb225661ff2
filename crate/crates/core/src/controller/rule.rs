use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::BitrateLadder;
use crate::sim::{CompositeAction, Env, SessionState};

/// Buffer-threshold baseline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Seconds to keep buffered ahead in the current video.
    pub buffer_target_s: f64,
    /// Seconds to prefetch for each upcoming video in the window.
    pub next_target_s: f64,
    /// Fraction of the throughput estimate the current-video bitrate may use.
    pub safety_factor: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            buffer_target_s: 10.0,
            next_target_s: 4.0,
            safety_factor: 0.9,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_target_s >= 0.0 && self.next_target_s >= 0.0) {
            return Err(Error::Config("rule-based buffer targets must be >= 0".into()));
        }
        if !(self.safety_factor > 0.0 && self.safety_factor <= 1.0) {
            return Err(Error::Config(format!(
                "safety factor must be in (0, 1], got {}",
                self.safety_factor
            )));
        }
        Ok(())
    }
}

/// Picks the next action by fixed buffer thresholds.
///
/// The current video is topped up first at the highest level that fits
/// under `safety_factor * estimate`; then each upcoming video in the window
/// is prefetched at the lowest level; otherwise the controller pauses for
/// the shortest allowed time.
pub fn rule_based_decide(
    env: &Env<'_>,
    state: &SessionState,
    estimate_mbps: f64,
    ladder: &BitrateLadder,
    rule: &RuleConfig,
) -> CompositeAction {
    let current = state.current_video;
    if state.has_missing(env.queue, current) && state.buffered_ahead(env.queue, current) < rule.buffer_target_s {
        let level = ladder.highest_at_most(rule.safety_factor * estimate_mbps * 1000.0);
        return CompositeAction::Download { video: current, level };
    }
    for video in env.window(state).skip(1) {
        if state.has_missing(env.queue, video) && state.buffered_ahead(env.queue, video) < rule.next_target_s {
            return CompositeAction::Download { video, level: 0 };
        }
    }
    CompositeAction::Pause {
        seconds: env.config.min_pause(),
    }
}
