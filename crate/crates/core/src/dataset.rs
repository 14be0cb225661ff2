//! Synthetic dataset generation, the on-disk dataset layout, and scenario assembly.
//!
//! A dataset directory looks like
//!
//! ```text
//! manifest.json        generator config, seed, ladder, trace index
//! network/*.trace      one `seconds mbps` pair per line
//! videos.csv           video_id,chunk_index,level,size_bytes
//! users.csv            user_id,video_id,watch_s
//! prefs.csv            user_id,alpha,beta,gamma,theta
//! ```

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{BitrateLadder, RecommendationQueue, Video};
use crate::rng::{mix, stream_rng};
use crate::traces::{BandwidthClass, NetworkTrace, PreferenceParams, TraceSample, UserTrace};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::Config(format!(
                "{name}: min {} must not exceed max {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub low: usize,
    pub medium: usize,
    pub high: usize,
}

impl ClassCounts {
    pub fn get(&self, class: BandwidthClass) -> usize {
        match class {
            BandwidthClass::Low => self.low,
            BandwidthClass::Medium => self.medium,
            BandwidthClass::High => self.high,
        }
    }

    pub fn only(class: BandwidthClass, n: usize) -> Self {
        let mut c = Self { low: 0, medium: 0, high: 0 };
        match class {
            BandwidthClass::Low => c.low = n,
            BandwidthClass::Medium => c.medium = n,
            BandwidthClass::High => c.high = n,
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRanges {
    pub alpha: Range,
    pub beta: Range,
    pub gamma: Range,
    /// Per MB.
    pub theta: Range,
}

impl Default for PreferenceRanges {
    fn default() -> Self {
        Self {
            alpha: Range::new(0.5, 2.0),
            beta: Range::new(0.5, 2.0),
            gamma: Range::new(0.25, 1.0),
            theta: Range::new(0.005, 0.02),
        }
    }
}

impl PreferenceRanges {
    /// Preferences at the centre of every range.
    pub fn midpoint(&self) -> PreferenceParams {
        PreferenceParams {
            alpha: self.alpha.midpoint(),
            beta: self.beta.midpoint(),
            gamma: self.gamma.midpoint(),
            theta: self.theta.midpoint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub traces_per_class: ClassCounts,
    pub trace_duration_s: f64,
    /// Length of each constant-bandwidth segment.
    pub segment_s: Range,
    /// Standard deviation of the per-segment log-bandwidth step.
    pub volatility: f64,
    pub num_videos: usize,
    pub chunks_per_video: (usize, usize),
    pub chunk_duration_s: f64,
    pub ladder: BitrateLadder,
    /// Relative chunk-size noise half-width.
    pub size_jitter: f64,
    pub num_users: usize,
    /// Watched share of each video, drawn per (user, video).
    pub watch_fraction: Range,
    pub prefs: PreferenceRanges,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            traces_per_class: ClassCounts {
                low: 5,
                medium: 5,
                high: 5,
            },
            trace_duration_s: 600.0,
            segment_s: Range::new(1.0, 4.0),
            volatility: 0.25,
            num_videos: 20,
            chunks_per_video: (8, 30),
            chunk_duration_s: 2.0,
            ladder: BitrateLadder::default(),
            size_jitter: 0.1,
            num_users: 10,
            watch_fraction: Range::new(0.3, 1.0),
            prefs: PreferenceRanges::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.segment_s.check("segment_s")?;
        self.watch_fraction.check("watch_fraction")?;
        self.prefs.alpha.check("prefs.alpha")?;
        self.prefs.beta.check("prefs.beta")?;
        self.prefs.gamma.check("prefs.gamma")?;
        self.prefs.theta.check("prefs.theta")?;
        if self.segment_s.min <= 0.0 {
            return Err(Error::Config("segment_s.min must be positive".into()));
        }
        if self.watch_fraction.min < 0.0 {
            return Err(Error::Config("watch_fraction.min must be >= 0".into()));
        }
        for (name, r) in [
            ("alpha", self.prefs.alpha),
            ("beta", self.prefs.beta),
            ("gamma", self.prefs.gamma),
            ("theta", self.prefs.theta),
        ] {
            if r.min < 0.0 {
                return Err(Error::Config(format!("prefs.{name} must be >= 0")));
            }
        }
        let (lo, hi) = self.chunks_per_video;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "chunks_per_video: need 1 <= min <= max, got ({lo}, {hi})"
            )));
        }
        if !(self.chunk_duration_s > 0.0) {
            return Err(Error::Config("chunk_duration_s must be positive".into()));
        }
        if !(self.trace_duration_s > 0.0) {
            return Err(Error::Config("trace_duration_s must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.size_jitter) {
            return Err(Error::Config("size_jitter must lie in [0, 1)".into()));
        }
        if self.volatility < 0.0 {
            return Err(Error::Config("volatility must be >= 0".into()));
        }
        if self.num_videos == 0 || self.num_users == 0 {
            return Err(Error::Config("num_videos and num_users must be positive".into()));
        }
        Ok(())
    }
}

/// Bandwidth band each synthesized trace of a class stays inside, in Mbps.
///
/// Every sample lies strictly inside the class interval, so the mean does too.
pub fn synthesis_band(class: BandwidthClass) -> (f64, f64) {
    match class {
        BandwidthClass::Low => (0.3, 1.45),
        BandwidthClass::Medium => (1.55, 2.95),
        BandwidthClass::High => (3.05, 6.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTrace {
    pub name: String,
    pub class: BandwidthClass,
    pub trace: NetworkTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub seed: u64,
    pub traces: Vec<NamedTrace>,
    pub videos: Vec<Video>,
    /// One entry per user, aligned with `videos`.
    pub users: Vec<UserTrace>,
    pub prefs: Vec<PreferenceParams>,
}

const STREAM_TRACES: u64 = 1;
const STREAM_VIDEOS: u64 = 2;
const STREAM_USERS: u64 = 3;
const STREAM_PREFS: u64 = 4;

fn synthesize_trace<R: Rng + ?Sized>(
    class: BandwidthClass,
    config: &DatasetConfig,
    rng: &mut R,
) -> Result<NetworkTrace> {
    let (lo, hi) = synthesis_band(class);
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let step = Normal::new(0.0, config.volatility.max(1e-12))
        .map_err(|e| Error::Config(format!("volatility: {e}")))?;
    let mut log_bw = rng.random_range(log_lo..=log_hi);
    let mut samples = Vec::new();
    let mut t = 0.0f64;
    while t < config.trace_duration_s {
        let mbps = (log_bw.exp() * 1e4).round() / 1e4;
        samples.push(TraceSample {
            time: t,
            mbps: mbps.clamp(lo, hi),
        });
        let dt = config.segment_s.sample(rng);
        t = ((t + dt) * 1e3).round() / 1e3;
        log_bw += step.sample(rng);
        // reflect at the band edges
        if log_bw > log_hi {
            log_bw = (2.0 * log_hi - log_bw).max(log_lo);
        } else if log_bw < log_lo {
            log_bw = (2.0 * log_lo - log_bw).min(log_hi);
        }
    }
    NetworkTrace::new(samples)
}

/// Generates traces, videos, per-user watch durations and preferences.
///
/// Output is a pure function of `(config, seed)`.
pub fn synthesize_dataset(config: &DatasetConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;

    let mut rng = stream_rng(seed, STREAM_TRACES);
    let mut traces = Vec::new();
    for class in BandwidthClass::ALL {
        for i in 0..config.traces_per_class.get(class) {
            let trace = synthesize_trace(class, config, &mut rng)?;
            debug_assert_eq!(trace.class(), class);
            traces.push(NamedTrace {
                name: format!("{}_{:03}", class.as_str(), i),
                class,
                trace,
            });
        }
    }

    let mut rng = stream_rng(seed, STREAM_VIDEOS);
    let (lo, hi) = config.chunks_per_video;
    let videos = (0..config.num_videos)
        .map(|i| {
            let n = rng.random_range(lo..=hi);
            Video::synthesize(
                format!("v{i:03}"),
                n,
                &config.ladder,
                config.chunk_duration_s,
                config.size_jitter,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = stream_rng(seed, STREAM_USERS);
    let users = (0..config.num_users)
        .map(|_| {
            let watch = videos
                .iter()
                .map(|v| {
                    let frac = config.watch_fraction.sample(&mut rng);
                    let secs = (frac * v.duration()).min(v.duration());
                    (secs * 1e3).round() / 1e3
                })
                .collect();
            UserTrace::new(watch)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = stream_rng(seed, STREAM_PREFS);
    let p = &config.prefs;
    let prefs = (0..config.num_users)
        .map(|_| {
            PreferenceParams::new(
                p.alpha.sample(&mut rng),
                p.beta.sample(&mut rng),
                p.gamma.sample(&mut rng),
                p.theta.sample(&mut rng),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        config: config.clone(),
        seed,
        traces,
        videos,
        users,
        prefs,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    config: DatasetConfig,
    traces: Vec<ManifestTrace>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestTrace {
    file: String,
    class: BandwidthClass,
}

#[derive(Debug, Serialize, Deserialize)]
struct VideoRow {
    video_id: String,
    chunk_index: usize,
    level: usize,
    size_bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UserRow {
    user_id: String,
    video_id: String,
    watch_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PrefRow {
    user_id: String,
    alpha: f64,
    beta: f64,
    gamma: f64,
    theta: f64,
}

fn user_id(i: usize) -> String {
    format!("u{i:03}")
}

impl Dataset {
    pub fn traces_of(&self, class: BandwidthClass) -> impl Iterator<Item = &NamedTrace> {
        self.traces.iter().filter(move |t| t.class == class)
    }

    pub fn ladder(&self) -> &BitrateLadder {
        &self.config.ladder
    }

    /// Writes the dataset directory, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("network"))?;
        let mut manifest_traces = Vec::with_capacity(self.traces.len());
        for t in &self.traces {
            let file = format!("network/{}.trace", t.name);
            t.trace.save_file(&dir.join(&file))?;
            manifest_traces.push(ManifestTrace { file, class: t.class });
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            seed: self.seed,
            config: self.config.clone(),
            traces: manifest_traces,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;

        let mut w = csv::Writer::from_path(dir.join("videos.csv"))?;
        for v in &self.videos {
            for (c, sizes) in v.chunk_sizes.iter().enumerate() {
                for (l, &size) in sizes.iter().enumerate() {
                    w.serialize(VideoRow {
                        video_id: v.id.clone(),
                        chunk_index: c,
                        level: l,
                        size_bytes: size,
                    })?;
                }
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("users.csv"))?;
        for (u, user) in self.users.iter().enumerate() {
            for (v, &watch_s) in self.videos.iter().zip(&user.watch_durations) {
                w.serialize(UserRow {
                    user_id: user_id(u),
                    video_id: v.id.clone(),
                    watch_s,
                })?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("prefs.csv"))?;
        for (u, p) in self.prefs.iter().enumerate() {
            w.serialize(PrefRow {
                user_id: user_id(u),
                alpha: p.alpha,
                beta: p.beta,
                gamma: p.gamma,
                theta: p.theta,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path).map_err(|e| {
            Error::Validation(format!("cannot read {}: {e}", manifest_path.display()))
        })?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported dataset format version {}",
                manifest.format_version
            )));
        }
        let config = manifest.config;

        let traces = manifest
            .traces
            .iter()
            .map(|mt| {
                let trace = NetworkTrace::load_file(&dir.join(&mt.file))?;
                let name = Path::new(&mt.file)
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or(&mt.file)
                    .to_string();
                Ok(NamedTrace {
                    name,
                    class: mt.class,
                    trace,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut order: Vec<String> = Vec::new();
        let mut chunks: HashMap<String, Vec<Vec<u64>>> = HashMap::new();
        for row in csv::Reader::from_path(dir.join("videos.csv"))?.deserialize() {
            let row: VideoRow = row?;
            let entry = chunks.entry(row.video_id.clone()).or_insert_with(|| {
                order.push(row.video_id.clone());
                Vec::new()
            });
            if row.chunk_index == entry.len() && row.level == 0 {
                entry.push(Vec::new());
            }
            let chunk = entry.get_mut(row.chunk_index).filter(|c| c.len() == row.level).ok_or_else(|| {
                Error::Validation(format!(
                    "videos.csv: rows for {} out of order at chunk {} level {}",
                    row.video_id, row.chunk_index, row.level
                ))
            })?;
            chunk.push(row.size_bytes);
        }
        let videos = order
            .iter()
            .map(|id| Video::new(id.clone(), config.chunk_duration_s, chunks.remove(id).unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        let video_pos: HashMap<&str, usize> = videos.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();

        let mut user_order: Vec<String> = Vec::new();
        let mut watch: HashMap<String, Vec<Option<f64>>> = HashMap::new();
        for row in csv::Reader::from_path(dir.join("users.csv"))?.deserialize() {
            let row: UserRow = row?;
            let pos = *video_pos
                .get(row.video_id.as_str())
                .ok_or_else(|| Error::Validation(format!("users.csv: unknown video {}", row.video_id)))?;
            let entry = watch.entry(row.user_id.clone()).or_insert_with(|| {
                user_order.push(row.user_id.clone());
                vec![None; videos.len()]
            });
            entry[pos] = Some(row.watch_s);
        }
        let users = user_order
            .iter()
            .map(|u| {
                let durations = watch[u]
                    .iter()
                    .enumerate()
                    .map(|(i, w)| {
                        w.ok_or_else(|| {
                            Error::Validation(format!("users.csv: user {u} has no entry for {}", videos[i].id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                UserTrace::new(durations)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut prefs_by_user: HashMap<String, PreferenceParams> = HashMap::new();
        for row in csv::Reader::from_path(dir.join("prefs.csv"))?.deserialize() {
            let row: PrefRow = row?;
            prefs_by_user.insert(row.user_id, PreferenceParams::new(row.alpha, row.beta, row.gamma, row.theta)?);
        }
        let prefs = user_order
            .iter()
            .map(|u| {
                prefs_by_user
                    .remove(u)
                    .ok_or_else(|| Error::Validation(format!("prefs.csv: no preferences for {u}")))
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            config,
            seed: manifest.seed,
            traces,
            videos,
            users,
            prefs,
        })
    }
}

/// One simulated session: a trace, a video queue, a user and their weights.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub class: BandwidthClass,
    pub trace: NetworkTrace,
    pub queue: RecommendationQueue,
    pub user: UserTrace,
    pub user_index: usize,
    pub prefs: PreferenceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub per_class: ClassCounts,
    pub queue_len: usize,
    /// Seed of the scenario draw, independent of the episode seeds.
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            per_class: ClassCounts {
                low: 20,
                medium: 20,
                high: 20,
            },
            queue_len: 8,
            seed: 0,
        }
    }
}

/// Assembles scenarios deterministically from `spec`.
///
/// Traces of a class are used round-robin; the user and the queue (a random
/// subset of the dataset's videos, in random order) are drawn per scenario.
pub fn build_scenarios(dataset: &Dataset, spec: &ScenarioSpec) -> Result<Vec<Scenario>> {
    if spec.queue_len == 0 || spec.queue_len > dataset.videos.len() {
        return Err(Error::Config(format!(
            "queue_len {} must lie in 1..={}",
            spec.queue_len,
            dataset.videos.len()
        )));
    }
    let mut out = Vec::new();
    for class in BandwidthClass::ALL {
        let n = spec.per_class.get(class);
        if n == 0 {
            continue;
        }
        let traces: Vec<&NamedTrace> = dataset.traces_of(class).collect();
        if traces.is_empty() {
            return Err(Error::Validation(format!("dataset has no {class} traces")));
        }
        for i in 0..n {
            let mut rng = stream_rng(spec.seed, mix(&[class as u64, i as u64]));
            let trace = traces[i % traces.len()];
            let user_index = rng.random_range(0..dataset.users.len());
            let mut picks: Vec<usize> = (0..dataset.videos.len()).collect();
            // partial Fisher-Yates
            for k in 0..spec.queue_len {
                let j = rng.random_range(k..picks.len());
                picks.swap(k, j);
            }
            picks.truncate(spec.queue_len);
            let queue = RecommendationQueue::new(picks.iter().map(|&p| dataset.videos[p].clone()).collect())?;
            let user = UserTrace::new(
                picks
                    .iter()
                    .map(|&p| dataset.users[user_index].watch_durations[p])
                    .collect(),
            )?;
            out.push(Scenario {
                id: format!("{}-{:03}", class.as_str(), i),
                class,
                trace: trace.trace.clone(),
                queue,
                user,
                user_index,
                prefs: dataset.prefs[user_index],
            });
        }
    }
    Ok(out)
}
