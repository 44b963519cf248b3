//! Shared domain types and interval arithmetic.
//!
//! Boundaries are real-valued and measured in snippet units. A proposal that
//! covers snippets `first..=last` is stored as `[first, last]`, so a single
//! snippet run has zero length.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalInterval {
    pub start: f64,
    pub end: f64,
}

impl TemporalInterval {
    /// Both endpoints must be finite and non-negative with `end >= start`.
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || start < 0.0 || end < start {
            return Err(Error::InvalidInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_degenerate(&self) -> bool {
        self.end <= self.start
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            start: self.start + by,
            end: self.end + by,
        }
    }
}

/// Intersection over union on the real line.
///
/// Two zero-length intervals at the same point have IoU 1, so every interval
/// (including single-snippet runs) overlaps itself completely.
pub fn temporal_iou(a: &TemporalInterval, b: &TemporalInterval) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.len() + b.len() - inter;
    if union <= 0.0 {
        return if a.start == b.start && a.end == b.end {
            1.0
        } else {
            0.0
        };
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Integer snippet indices `i` with `ceil(start) <= i <= floor(end)`.
///
/// The range is not clipped to the video length; see [`inner_snippets_clipped`].
pub fn inner_snippets(interval: &TemporalInterval) -> std::ops::RangeInclusive<usize> {
    let first = interval.start.ceil();
    let last = interval.end.floor();
    if last < first || last < 0.0 {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    (first.max(0.0) as usize)..=(last as usize)
}

/// Inner snippets restricted to `[0, len - 1]`.
pub fn inner_snippets_clipped(interval: &TemporalInterval, len: usize) -> std::ops::RangeInclusive<usize> {
    let r = inner_snippets(interval);
    if len == 0 || r.is_empty() || *r.start() >= len {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    *r.start()..=(*r.end()).min(len - 1)
}

/// One predicted segment `(class, confidence, start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionInstance {
    pub class_id: usize,
    pub confidence: f64,
    pub interval: TemporalInterval,
}

impl ActionInstance {
    pub fn new(class_id: usize, confidence: f64, start: f64, end: f64) -> Result<Self> {
        if !confidence.is_finite() {
            return Err(Error::NonFinite("confidence"));
        }
        Ok(Self {
            class_id,
            confidence,
            interval: TemporalInterval::new(start, end)?,
        })
    }

    pub fn start(&self) -> f64 {
        self.interval.start
    }

    pub fn end(&self) -> f64 {
        self.interval.end
    }
}

/// Ranking used everywhere a deterministic "most confident first" order is
/// needed: higher confidence, then earlier start, then smaller class id.
pub fn rank_order(a: &ActionInstance, b: &ActionInstance) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.interval.start.total_cmp(&b.interval.start))
        .then(a.class_id.cmp(&b.class_id))
}

/// Stable sort by [`rank_order`]; equal keys keep input order.
pub fn sort_by_rank(instances: &mut [ActionInstance]) {
    instances.sort_by(rank_order);
}

/// Temporal class activation map: `l x K` per-snippet class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Tcam {
    scores: Array2<f64>,
}

impl Tcam {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        let (l, k) = scores.dim();
        if l == 0 || k == 0 {
            return Err(Error::ShapeMismatch {
                expected: "l >= 1 and K >= 1".into(),
                got: format!("{l}x{k}"),
            });
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tcam scores"));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn num_snippets(&self) -> usize {
        self.scores.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.scores.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_id: usize,
    pub interval: TemporalInterval,
}

/// A (synthetic) video: snippet features, video-level labels and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub features: Array2<f64>,
    pub video_labels: Vec<u8>,
    pub ground_truth: Vec<GroundTruth>,
}

impl VideoRecord {
    pub fn num_snippets(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.video_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.num_snippets() as f64;
        for gt in &self.ground_truth {
            if gt.interval.end > l || gt.interval.start < 0.0 {
                return Err(Error::InvalidInterval {
                    start: gt.interval.start,
                    end: gt.interval.end,
                });
            }
            if gt.class_id >= self.num_classes() {
                return Err(Error::config(
                    "ground_truth.class",
                    format!("class {} out of range", gt.class_id),
                ));
            }
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        Ok(())
    }
}
