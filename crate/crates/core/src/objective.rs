//! QoE, bandwidth cost and the personalized objective `QoE - theta * MB`.
//!
//! The smoothness penalty runs over consecutive watched chunks across video
//! boundaries: switching from the last chunk of one video to the first chunk
//! of the next at a different level is penalized like any other switch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{BitrateLadder, QualityMapping};
use crate::sim::SessionState;
use crate::traces::PreferenceParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QoeTerms {
    pub quality_sum: f64,
    pub rebuffer_sum: f64,
    pub smoothness_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub qoe_raw: f64,
    pub terms: QoeTerms,
    pub chunks_watched: usize,
    pub bandwidth_mb: f64,
    /// Wasted over downloaded bytes, 0 when nothing was downloaded.
    pub wastage_fraction: f64,
    pub objective: f64,
}

/// Weighted QoE over the watched chunks, in play order.
///
/// `bitrates_kbps[n]` and `rebuffer_s[n]` describe the n-th watched chunk.
pub fn qoe(
    bitrates_kbps: &[f64],
    rebuffer_s: &[f64],
    prefs: &PreferenceParams,
    mapping: QualityMapping,
) -> Result<(f64, QoeTerms)> {
    if bitrates_kbps.len() != rebuffer_s.len() {
        return Err(Error::Validation(format!(
            "{} watched chunks but {} rebuffer entries",
            bitrates_kbps.len(),
            rebuffer_s.len()
        )));
    }
    let qualities = bitrates_kbps
        .iter()
        .map(|&b| mapping.quality(b))
        .collect::<Result<Vec<_>>>()?;
    let terms = QoeTerms {
        quality_sum: qualities.iter().sum(),
        rebuffer_sum: rebuffer_s.iter().sum(),
        smoothness_sum: qualities.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
    };
    Ok((combine(&terms, prefs), terms))
}

fn combine(terms: &QoeTerms, prefs: &PreferenceParams) -> f64 {
    prefs.alpha * terms.quality_sum - prefs.beta * terms.rebuffer_sum - prefs.gamma * terms.smoothness_sum
}

/// Total downloaded volume in MB (10^6 bytes).
pub fn bandwidth_cost(state: &SessionState) -> f64 {
    state.downloaded_bytes as f64 / 1e6
}

pub fn combined_objective(qoe_raw: f64, bandwidth_mb: f64, theta: f64) -> f64 {
    qoe_raw - theta * bandwidth_mb
}

/// Metrics of the session so far.
///
/// Stall time already spent waiting for a chunk that has not started
/// playing yet is included in the rebuffer term, so the objective never
/// jumps when that chunk finally plays.
pub fn session_metrics(
    state: &SessionState,
    ladder: &BitrateLadder,
    prefs: &PreferenceParams,
    mapping: QualityMapping,
) -> Result<SessionMetrics> {
    let qualities = mapping.ladder_qualities(ladder);
    let mut terms = QoeTerms::default();
    let mut prev: Option<f64> = None;
    for e in &state.watch_log {
        let q = *qualities.get(e.level).ok_or(Error::Index {
            what: "ladder level",
            index: e.level,
            len: qualities.len(),
        })?;
        terms.quality_sum += q;
        terms.rebuffer_sum += e.rebuffer;
        if let Some(p) = prev {
            terms.smoothness_sum += (q - p).abs();
        }
        prev = Some(q);
    }
    terms.rebuffer_sum += state.pending_stall;
    let qoe_raw = combine(&terms, prefs);
    let bandwidth_mb = bandwidth_cost(state);
    Ok(SessionMetrics {
        qoe_raw,
        terms,
        chunks_watched: state.watch_log.len(),
        bandwidth_mb,
        wastage_fraction: if state.downloaded_bytes == 0 {
            0.0
        } else {
            state.wasted_bytes as f64 / state.downloaded_bytes as f64
        },
        objective: combined_objective(qoe_raw, bandwidth_mb, prefs.theta),
    })
}

/// Objective gained between two snapshots of the same session.
pub fn step_objective_delta(before: &SessionMetrics, after: &SessionMetrics) -> f64 {
    after.objective - before.objective
}

/// Fixed bounds mapping raw QoE onto `[0, 1]` for reports.
///
/// For a session with `N` watched chunks the upper bound is every chunk at
/// the top ladder quality with no stalls, `alpha * N * q_top`; the lower
/// bound is zero quality with the whole rebuffer budget spent and a maximal
/// switch between every pair of chunks,
/// `-beta * budget - gamma * (N - 1) * (q_top - q_bottom)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeBounds {
    pub rebuffer_budget_s: f64,
}

impl Default for QoeBounds {
    fn default() -> Self {
        Self { rebuffer_budget_s: 30.0 }
    }
}

impl QoeBounds {
    pub fn range(&self, chunks: usize, prefs: &PreferenceParams, ladder: &BitrateLadder, mapping: QualityMapping) -> (f64, f64) {
        let q = mapping.ladder_qualities(ladder);
        let (q_lo, q_hi) = (q[0], q[q.len() - 1]);
        let n = chunks as f64;
        let max = prefs.alpha * n * q_hi;
        let min = -prefs.beta * self.rebuffer_budget_s - prefs.gamma * (n - 1.0).max(0.0) * (q_hi - q_lo);
        (min, max)
    }

    /// Normalized QoE clamped to `[0, 1]`; 0 for an empty or degenerate range.
    pub fn normalize(&self, metrics: &SessionMetrics, prefs: &PreferenceParams, ladder: &BitrateLadder, mapping: QualityMapping) -> f64 {
        let (min, max) = self.range(metrics.chunks_watched, prefs, ladder, mapping);
        if metrics.chunks_watched == 0 || !(max > min) {
            return 0.0;
        }
        ((metrics.qoe_raw - min) / (max - min)).clamp(0.0, 1.0)
    }

    /// Header line documenting the bounds, for reports.
    pub fn describe(&self) -> String {
        format!(
            "QoE normalized per session: max = alpha*N*q(top), min = -beta*{}s - gamma*(N-1)*(q(top)-q(bottom)), clamped to [0,1]",
            self.rebuffer_budget_s
        )
    }
}
