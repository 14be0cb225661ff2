//! Network traces, bandwidth classes, user watch behaviour and preference weights.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean-bandwidth boundary between `Low` and `Medium`, in Mbps.
pub const LOW_MEDIUM_THRESHOLD_MBPS: f64 = 1.5;
/// Mean-bandwidth boundary between `Medium` and `High`, in Mbps.
pub const MEDIUM_HIGH_THRESHOLD_MBPS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time: f64,
    pub mbps: f64,
}

/// Piecewise-constant bandwidth over time, repeated cyclically past its end.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    samples: Vec<TraceSample>,
    span: f64,
}

impl NetworkTrace {
    pub fn new(samples: Vec<TraceSample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Validation("network trace has no samples".into()));
        };
        if first.time != 0.0 {
            return Err(Error::Validation(format!(
                "network trace must start at t=0, starts at {}",
                first.time
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.time.is_finite() {
                return Err(Error::Validation(format!("sample {i}: non-finite timestamp")));
            }
            if !(s.mbps > 0.0) || !s.mbps.is_finite() {
                return Err(Error::Validation(format!(
                    "sample {i}: bandwidth must be positive, got {}",
                    s.mbps
                )));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].time <= w[0].time) {
            return Err(Error::Validation(format!(
                "timestamps must be strictly increasing (sample {})",
                i + 1
            )));
        }
        // The final segment lasts as long as the one before it.
        let span = match samples.len() {
            1 => f64::INFINITY,
            n => {
                let last = samples[n - 1].time;
                last + (last - samples[n - 2].time)
            }
        };
        Ok(Self { samples, span })
    }

    /// A single-sample trace that holds `mbps` forever.
    pub fn constant(mbps: f64) -> Result<Self> {
        Self::new(vec![TraceSample { time: 0.0, mbps }])
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(time, mbps)| TraceSample { time, mbps })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    /// Length of one cycle in seconds; infinite for a single-sample trace.
    pub fn span(&self) -> f64 {
        self.span
    }

    /// Time-weighted mean bandwidth over one cycle.
    pub fn mean_mbps(&self) -> f64 {
        if self.samples.len() == 1 {
            return self.samples[0].mbps;
        }
        let mut area = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            let end = self.samples.get(i + 1).map_or(self.span, |n| n.time);
            area += s.mbps * (end - s.time);
        }
        area / self.span
    }

    fn cycle_position(&self, t: f64) -> (usize, f64, f64) {
        // Returns (segment index, segment start, segment end) in absolute time.
        if self.samples.len() == 1 {
            return (0, 0.0, f64::INFINITY);
        }
        let offset = (t / self.span).floor() * self.span;
        let mut local = t - offset;
        let mut offset = offset;
        if local >= self.span {
            local -= self.span;
            offset += self.span;
        } else if local < 0.0 {
            local += self.span;
            offset -= self.span;
        }
        let idx = self.samples.partition_point(|s| s.time <= local) - 1;
        let end = self.samples.get(idx + 1).map_or(self.span, |n| n.time);
        (idx, offset + self.samples[idx].time, offset + end)
    }

    /// Bandwidth in effect at time `t` (seconds, `t >= 0`).
    pub fn bandwidth_at(&self, t: f64) -> f64 {
        let (idx, _, _) = self.cycle_position(t.max(0.0));
        self.samples[idx].mbps
    }

    /// Seconds needed to transfer `bytes` starting at time `start`.
    pub fn transfer_time(&self, start: f64, bytes: u64) -> f64 {
        let mut remaining = bytes as f64 * 8.0 / 1e6;
        let mut t = start.max(0.0);
        let (mut idx, seg_start, _) = self.cycle_position(t);
        // Walk segments by index; re-deriving the segment from `t` can stall
        // on a boundary when `offset + end` rounds back below it.
        let mut offset = seg_start - self.samples[idx].time;
        loop {
            let mbps = self.samples[idx].mbps;
            let end = offset + self.samples.get(idx + 1).map_or(self.span, |n| n.time);
            let capacity = mbps * (end - t).max(0.0);
            if capacity >= remaining {
                return t + remaining / mbps - start;
            }
            remaining -= capacity;
            t = t.max(end);
            idx += 1;
            if idx == self.samples.len() {
                idx = 0;
                offset += self.span;
            }
        }
    }

    pub fn class(&self) -> BandwidthClass {
        classify_trace(self)
    }

    /// Canonical text form: one `seconds mbps` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let _ = writeln!(out, "{} {}", s.time, s.mbps);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(t), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected `<seconds> <mbps>`, got {line:?}"),
                });
            };
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("{s:?}: {e}"),
                })
            };
            samples.push(TraceSample {
                time: parse(t)?,
                mbps: parse(b)?,
            });
        }
        Self::new(samples)
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(std::fs::File::open(path)?)
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Parses a trace from any byte stream in the text trace format.
pub fn load_network_trace<R: Read>(source: R) -> Result<NetworkTrace> {
    NetworkTrace::load(source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthClass {
    Low,
    Medium,
    High,
}

impl BandwidthClass {
    pub const ALL: [BandwidthClass; 3] = [BandwidthClass::Low, BandwidthClass::Medium, BandwidthClass::High];

    pub fn from_mean(mean_mbps: f64) -> Self {
        if mean_mbps < LOW_MEDIUM_THRESHOLD_MBPS {
            BandwidthClass::Low
        } else if mean_mbps < MEDIUM_HIGH_THRESHOLD_MBPS {
            BandwidthClass::Medium
        } else {
            BandwidthClass::High
        }
    }

    /// Cold-start throughput guess for a session in this class.
    ///
    /// The midpoint of the class interval; `High` is open-ended and uses
    /// the threshold plus half the width of the `Medium` band.
    pub fn prior_mbps(self) -> f64 {
        match self {
            BandwidthClass::Low => LOW_MEDIUM_THRESHOLD_MBPS / 2.0,
            BandwidthClass::Medium => (LOW_MEDIUM_THRESHOLD_MBPS + MEDIUM_HIGH_THRESHOLD_MBPS) / 2.0,
            BandwidthClass::High => {
                MEDIUM_HIGH_THRESHOLD_MBPS + (MEDIUM_HIGH_THRESHOLD_MBPS - LOW_MEDIUM_THRESHOLD_MBPS) / 2.0
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BandwidthClass::Low => "low",
            BandwidthClass::Medium => "medium",
            BandwidthClass::High => "high",
        }
    }

    /// Capitalized name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            BandwidthClass::Low => "Low",
            BandwidthClass::Medium => "Medium",
            BandwidthClass::High => "High",
        }
    }
}

impl std::fmt::Display for BandwidthClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BandwidthClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(BandwidthClass::Low),
            "medium" => Ok(BandwidthClass::Medium),
            "high" => Ok(BandwidthClass::High),
            other => Err(Error::Validation(format!("unknown bandwidth class {other:?}"))),
        }
    }
}

/// Classifies a trace by its time-weighted mean bandwidth over one cycle.
pub fn classify_trace(trace: &NetworkTrace) -> BandwidthClass {
    BandwidthClass::from_mean(trace.mean_mbps())
}

/// Intended watch time for each video of a session's queue, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTrace {
    pub watch_durations: Vec<f64>,
}

impl UserTrace {
    pub fn new(watch_durations: Vec<f64>) -> Result<Self> {
        if let Some(d) = watch_durations.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::Validation(format!(
                "watch durations must be finite and non-negative, got {d}"
            )));
        }
        Ok(Self { watch_durations })
    }
}

/// Per-user weights of the personalized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceParams {
    /// Quality weight.
    pub alpha: f64,
    /// Rebuffering weight, per second.
    pub beta: f64,
    /// Smoothness weight.
    pub gamma: f64,
    /// Bandwidth-cost weight, per MB.
    pub theta: f64,
}

impl PreferenceParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, theta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("theta", self.theta),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for PreferenceParams {
    /// Midpoints of the default synthesis ranges.
    fn default() -> Self {
        Self {
            alpha: 1.25,
            beta: 1.25,
            gamma: 0.625,
            theta: 0.0125,
        }
    }
}
