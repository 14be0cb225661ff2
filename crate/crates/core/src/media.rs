//! Videos, bitrate ladders and the bitrate-to-quality mapping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete encodings available for every chunk, in kbps, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct BitrateLadder(Vec<u32>);

impl BitrateLadder {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::Validation(format!(
                "bitrate ladder needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        if levels[0] == 0 {
            return Err(Error::Validation("bitrate ladder levels must be positive".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "bitrate ladder must be strictly increasing: {levels:?}"
            )));
        }
        Ok(Self(levels))
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn kbps(&self, level: usize) -> Result<u32> {
        self.0.get(level).copied().ok_or(Error::Index {
            what: "ladder level",
            index: level,
            len: self.0.len(),
        })
    }

    pub fn lowest(&self) -> u32 {
        self.0[0]
    }

    pub fn highest(&self) -> u32 {
        self.0[self.0.len() - 1]
    }

    /// Highest level whose bitrate does not exceed `kbps`, or level 0 if none does.
    pub fn highest_at_most(&self, kbps: f64) -> usize {
        self.0
            .iter()
            .rposition(|&b| f64::from(b) <= kbps)
            .unwrap_or(0)
    }
}

impl Default for BitrateLadder {
    fn default() -> Self {
        Self(vec![500, 1000, 1500, 2500])
    }
}

impl TryFrom<Vec<u32>> for BitrateLadder {
    type Error = Error;

    fn try_from(levels: Vec<u32>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<BitrateLadder> for Vec<u32> {
    fn from(ladder: BitrateLadder) -> Self {
        ladder.0
    }
}

/// Perceived quality as a function of bitrate.
///
/// Quality is expressed in Mbps units for the linear mapping. The log mapping
/// is `ln(B / min_kbps)`, zero at the reference bitrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QualityMapping {
    #[default]
    Linear,
    Log {
        min_kbps: f64,
    },
}

impl QualityMapping {
    pub fn quality(&self, kbps: f64) -> Result<f64> {
        if !(kbps > 0.0) || !kbps.is_finite() {
            return Err(Error::Domain(format!("bitrate must be positive, got {kbps}")));
        }
        Ok(match *self {
            QualityMapping::Linear => kbps / 1000.0,
            QualityMapping::Log { min_kbps } => (kbps / min_kbps).ln(),
        })
    }

    /// Quality of every ladder level, bottom to top.
    pub fn ladder_qualities(&self, ladder: &BitrateLadder) -> Vec<f64> {
        ladder
            .levels()
            .iter()
            .map(|&b| self.quality(f64::from(b)).expect("ladder bitrates are positive"))
            .collect()
    }

    /// Log mapping anchored at the ladder's lowest level.
    pub fn log_for(ladder: &BitrateLadder) -> Self {
        QualityMapping::Log {
            min_kbps: f64::from(ladder.lowest()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Video {
    pub id: String,
    pub chunk_duration: f64,
    /// `chunk_sizes[chunk][level]` in bytes.
    pub chunk_sizes: Vec<Vec<u64>>,
}

impl Video {
    pub fn new(id: impl Into<String>, chunk_duration: f64, chunk_sizes: Vec<Vec<u64>>) -> Result<Self> {
        let video = Self {
            id: id.into(),
            chunk_duration,
            chunk_sizes,
        };
        video.validate()?;
        Ok(video)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chunk_duration > 0.0) || !self.chunk_duration.is_finite() {
            return Err(Error::Validation(format!(
                "video {}: chunk duration must be positive",
                self.id
            )));
        }
        if self.chunk_sizes.is_empty() {
            return Err(Error::Validation(format!("video {}: no chunks", self.id)));
        }
        let levels = self.chunk_sizes[0].len();
        for (c, sizes) in self.chunk_sizes.iter().enumerate() {
            if sizes.len() != levels || levels == 0 {
                return Err(Error::Validation(format!(
                    "video {}: chunk {c} has {} levels, expected {levels}",
                    self.id,
                    sizes.len()
                )));
            }
            if sizes.iter().any(|&s| s == 0) {
                return Err(Error::Validation(format!(
                    "video {}: chunk {c} has a zero size",
                    self.id
                )));
            }
            if sizes.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Validation(format!(
                    "video {}: chunk {c} sizes decrease with level",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn num_chunks(&self) -> usize {
        self.chunk_sizes.len()
    }

    pub fn num_levels(&self) -> usize {
        self.chunk_sizes[0].len()
    }

    /// Total playable length in seconds.
    pub fn duration(&self) -> f64 {
        self.chunk_duration * self.chunk_sizes.len() as f64
    }

    pub fn chunk_size(&self, chunk: usize, level: usize) -> Result<u64> {
        let sizes = self.chunk_sizes.get(chunk).ok_or(Error::Index {
            what: "chunk",
            index: chunk,
            len: self.chunk_sizes.len(),
        })?;
        sizes.get(level).copied().ok_or(Error::Index {
            what: "ladder level",
            index: level,
            len: sizes.len(),
        })
    }

    /// Largest size at `level` across all chunks.
    pub fn max_chunk_size(&self, level: usize) -> u64 {
        self.chunk_sizes.iter().map(|s| s[level]).max().unwrap_or(0)
    }

    /// Draws chunk sizes as `kbps * duration / 8 * noise`, noise uniform in
    /// `[1 - jitter, 1 + jitter]`, then clamps each chunk so sizes never
    /// decrease with level.
    pub fn synthesize<R: Rng + ?Sized>(
        id: impl Into<String>,
        num_chunks: usize,
        ladder: &BitrateLadder,
        chunk_duration: f64,
        jitter: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut chunk_sizes = Vec::with_capacity(num_chunks);
        for _ in 0..num_chunks {
            let mut sizes = Vec::with_capacity(ladder.len());
            let mut floor = 1u64;
            for &kbps in ladder.levels() {
                let noise = if jitter > 0.0 {
                    rng.random_range(1.0 - jitter..=1.0 + jitter)
                } else {
                    1.0
                };
                let nominal = f64::from(kbps) * 1000.0 * chunk_duration / 8.0;
                let size = ((nominal * noise).round() as u64).max(floor);
                floor = size;
                sizes.push(size);
            }
            chunk_sizes.push(sizes);
        }
        Self::new(id, chunk_duration, chunk_sizes)
    }
}

/// Ordered videos making up one session's feed.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationQueue {
    videos: Vec<Video>,
}

impl RecommendationQueue {
    pub fn new(videos: Vec<Video>) -> Result<Self> {
        if videos.is_empty() {
            return Err(Error::Validation("recommendation queue is empty".into()));
        }
        let mut ids: Vec<&str> = videos.iter().map(|v| v.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate video id {} in queue", w[0])));
        }
        let levels = videos[0].num_levels();
        if let Some(v) = videos.iter().find(|v| v.num_levels() != levels) {
            return Err(Error::Validation(format!(
                "video {} has {} levels, queue expects {levels}",
                v.id,
                v.num_levels()
            )));
        }
        Ok(Self { videos })
    }

    pub fn videos(&self) -> &[Video] {
        &self.videos
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&Video> {
        self.videos.get(index).ok_or(Error::Index {
            what: "queue position",
            index,
            len: self.videos.len(),
        })
    }
}
