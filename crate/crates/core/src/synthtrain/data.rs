use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GroundTruth, TemporalInterval, VideoRecord};

/// Minimum number of background snippets between two segments.
pub const MIN_SEGMENT_GAP: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_videos: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub snippet_range: (usize, usize),
    pub segments_per_video: (usize, usize),
    pub segment_length_range: (usize, usize),
    pub feature_noise_sigma: f64,
    pub prototype_separation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_videos: 40,
            num_classes: 4,
            feature_dim: 16,
            snippet_range: (60, 120),
            segments_per_video: (1, 3),
            segment_length_range: (6, 18),
            feature_noise_sigma: 1.0,
            prototype_separation: 3.0,
            seed: 0,
        }
    }
}

fn check_range(field: &'static str, (lo, hi): (usize, usize)) -> Result<()> {
    if lo > hi {
        return Err(Error::config(field, format!("min {lo} exceeds max {hi}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos == 0 {
            return Err(Error::config("num_videos", "must be at least 1"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("num_classes", "must be at least 1"));
        }
        if self.feature_dim < self.num_classes + 1 {
            return Err(Error::config(
                "feature_dim",
                format!("needs room for {} prototypes", self.num_classes + 1),
            ));
        }
        check_range("snippet_range", self.snippet_range)?;
        check_range("segments_per_video", self.segments_per_video)?;
        check_range("segment_length_range", self.segment_length_range)?;
        if self.segments_per_video.0 == 0 {
            return Err(Error::config("segments_per_video", "every video needs a segment"));
        }
        if self.segment_length_range.0 < 2 {
            return Err(Error::config(
                "segment_length_range",
                "segments span at least 2 snippets",
            ));
        }
        let (m, len) = (self.segments_per_video.1, self.segment_length_range.1);
        let needed = m * len + (m - 1) * MIN_SEGMENT_GAP;
        if needed > self.snippet_range.0 {
            return Err(Error::config(
                "snippet_range",
                format!(
                    "{m} segments of up to {len} snippets need {needed} snippets, but videos may have {}",
                    self.snippet_range.0
                ),
            ));
        }
        if !(self.feature_noise_sigma >= 0.0 && self.feature_noise_sigma.is_finite()) {
            return Err(Error::config("feature_noise_sigma", "must be finite and >= 0"));
        }
        if !(self.prototype_separation > 0.0 && self.prototype_separation.is_finite()) {
            return Err(Error::config("prototype_separation", "must be positive"));
        }
        Ok(())
    }

    /// Row `k` is the prototype of class `k`; row `K` is background.
    pub fn prototypes(&self) -> Array2<f64> {
        let mut p = Array2::zeros((self.num_classes + 1, self.feature_dim));
        for k in 0..=self.num_classes {
            p[[k, k]] = self.prototype_separation;
        }
        p
    }
}

pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<VideoRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let protos = cfg.prototypes();
    let noise = Normal::new(0.0, cfg.feature_noise_sigma)
        .map_err(|e| Error::config("feature_noise_sigma", e.to_string()))?;
    let bg = cfg.num_classes;

    let mut videos = Vec::with_capacity(cfg.num_videos);
    for v in 0..cfg.num_videos {
        let l = rng.random_range(cfg.snippet_range.0..=cfg.snippet_range.1);
        let m = rng.random_range(cfg.segments_per_video.0..=cfg.segments_per_video.1);
        let lens: Vec<usize> = (0..m)
            .map(|_| rng.random_range(cfg.segment_length_range.0..=cfg.segment_length_range.1))
            .collect();
        let free = l - lens.iter().sum::<usize>() - (m - 1) * MIN_SEGMENT_GAP;
        let mut cuts: Vec<usize> = (0..m).map(|_| rng.random_range(0..=free)).collect();
        cuts.sort_unstable();

        let mut snippet_class = vec![bg; l];
        let mut ground_truth = Vec::with_capacity(m);
        let mut labels = vec![0u8; cfg.num_classes];
        let mut cursor = 0;
        let mut prev_cut = 0;
        for (i, (&len, &cut)) in lens.iter().zip(&cuts).enumerate() {
            cursor += cut - prev_cut + if i > 0 { MIN_SEGMENT_GAP } else { 0 };
            prev_cut = cut;
            let class_id = rng.random_range(0..cfg.num_classes);
            for c in &mut snippet_class[cursor..cursor + len] {
                *c = class_id;
            }
            ground_truth.push(GroundTruth {
                class_id,
                interval: TemporalInterval::new(cursor as f64, (cursor + len - 1) as f64)?,
            });
            labels[class_id] = 1;
            cursor += len;
        }

        let mut features = Array2::zeros((l, cfg.feature_dim));
        for (t, &c) in snippet_class.iter().enumerate() {
            for j in 0..cfg.feature_dim {
                features[[t, j]] = protos[[c, j]] + noise.sample(&mut rng);
            }
        }
        videos.push(VideoRecord {
            id: format!("video_{v:04}"),
            features,
            video_labels: labels,
            ground_truth,
        });
    }
    Ok(videos)
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Splits videos into (train, held-out) index lists; roughly a quarter of the
/// ids hash into the held-out split. Both sides are kept non-empty when there
/// are at least two videos.
pub fn split_holdout(videos: &[VideoRecord], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut test): (Vec<usize>, Vec<usize>) =
        (0..videos.len()).partition(|&i| !fnv1a(seed, videos[i].id.as_bytes()).is_multiple_of(4));
    if videos.len() >= 2 {
        if test.is_empty() {
            test.push(train.pop().expect("at least two videos"));
        } else if train.is_empty() {
            train.push(test.remove(0));
        }
    }
    (train, test)
}
