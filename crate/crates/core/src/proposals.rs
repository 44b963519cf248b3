//! Candidate pool construction: multi-threshold sweeps over a normalized TCAM,
//! scored with the Inner-Outer Contrast.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{inner_snippets_clipped, sort_by_rank, ActionInstance, Tcam, TemporalInterval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    pub thresholds: Vec<f64>,
    pub alpha: f64,
    pub min_confidence: f64,
    pub class_gate: f64,
}

impl ProposalConfig {
    pub const DEFAULT_ALPHA: f64 = 0.25;

    /// `n` thresholds evenly spaced over `[lo, hi]`.
    pub fn even_thresholds(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::config("thresholds", "must not be empty"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::config("thresholds", "values must lie in (0, 1)"));
        }
        if self.thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("thresholds", "must be strictly increasing"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be positive"));
        }
        if !self.min_confidence.is_finite() {
            return Err(Error::config("min_confidence", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.class_gate) {
            return Err(Error::config("class_gate", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            thresholds: Self::even_thresholds(0.1, 0.9, 10),
            alpha: Self::DEFAULT_ALPHA,
            min_confidence: 0.0,
            class_gate: 0.5,
        }
    }
}

/// A thresholded run, before it has been scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub class_id: usize,
    pub interval: TemporalInterval,
}

/// Per-class min-max normalization over time. Constant columns become zeros.
pub fn normalize_scores(tcam: &Tcam) -> Array2<f64> {
    let mut out = tcam.scores().clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span > 0.0 {
            col.mapv_inplace(|x| (x - lo) / span);
        } else {
            col.fill(0.0);
        }
    }
    out
}

/// Every maximal run of snippets with `prob > threshold`, for each active
/// class and threshold. Runs found at several thresholds are kept once.
pub fn threshold_proposals(
    probs: &Array2<f64>,
    thresholds: &[f64],
    active_classes: &[usize],
) -> Vec<Proposal> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for &c in active_classes {
        if c >= probs.ncols() {
            continue;
        }
        let col = probs.column(c);
        for &theta in thresholds {
            let mut run_start: Option<usize> = None;
            for i in 0..=col.len() {
                let above = i < col.len() && col[i] > theta;
                match (above, run_start) {
                    (true, None) => run_start = Some(i),
                    (false, Some(first)) => {
                        let last = i - 1;
                        if seen.insert((c, first, last)) {
                            out.push(Proposal {
                                class_id: c,
                                interval: TemporalInterval {
                                    start: first as f64,
                                    end: last as f64,
                                },
                            });
                        }
                        run_start = None;
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

/// Length of each flanking window: `max(1, round(alpha * (end - start)))`.
pub fn outer_len(interval: &TemporalInterval, alpha: f64) -> usize {
    ((alpha * interval.len()).round() as usize).max(1)
}

/// Left and right outer windows around an inner snippet range, clipped to
/// `[0, len - 1]`. The right window starts one snippet after the inner range.
pub fn outer_windows(
    inner: &RangeInclusive<usize>,
    outer_len: usize,
    len: usize,
) -> (RangeInclusive<usize>, RangeInclusive<usize>) {
    #[allow(clippy::reversed_empty_ranges)]
    let empty = 1..=0;
    let (first, last) = (*inner.start(), *inner.end());
    let left = if first == 0 {
        empty.clone()
    } else {
        first.saturating_sub(outer_len)..=first - 1
    };
    let right = if last + 1 >= len {
        empty
    } else {
        (last + 1)..=(last + outer_len).min(len - 1)
    };
    (left, right)
}

/// Mean score over the inner snippets minus mean score over the outer windows.
pub fn oic_confidence(
    probs_col: ArrayView1<'_, f64>,
    interval: &TemporalInterval,
    alpha: f64,
) -> Result<f64> {
    let len = probs_col.len();
    let inner = inner_snippets_clipped(interval, len);
    if inner.is_empty() {
        return Err(Error::EmptyInner {
            start: interval.start,
            end: interval.end,
            len,
        });
    }
    let inner_n = inner.clone().count();
    let inner_mean = inner.clone().map(|i| probs_col[i]).sum::<f64>() / inner_n as f64;
    let (left, right) = outer_windows(&inner, outer_len(interval, alpha), len);
    let outer: Vec<f64> = left.chain(right).map(|i| probs_col[i]).collect();
    let outer_mean = if outer.is_empty() {
        0.0
    } else {
        outer.iter().sum::<f64>() / outer.len() as f64
    };
    Ok(inner_mean - outer_mean)
}

/// Gate classes on video-level scores, sweep thresholds on the normalized TCAM,
/// score each run and return the pool sorted by descending confidence.
pub fn build_candidate_pool(tcam: &Tcam, video_scores: &[f64], cfg: &ProposalConfig) -> Vec<ActionInstance> {
    let active: Vec<usize> = video_scores
        .iter()
        .enumerate()
        .filter(|(c, s)| *c < tcam.num_classes() && **s > cfg.class_gate)
        .map(|(c, _)| c)
        .collect();
    if active.is_empty() {
        return Vec::new();
    }
    let probs = normalize_scores(tcam);
    let mut pool: Vec<ActionInstance> = threshold_proposals(&probs, &cfg.thresholds, &active)
        .into_iter()
        .filter_map(|p| {
            let q = oic_confidence(probs.column(p.class_id), &p.interval, cfg.alpha).ok()?;
            (q > cfg.min_confidence).then_some(ActionInstance {
                class_id: p.class_id,
                confidence: q,
                interval: p.interval,
            })
        })
        .collect();
    sort_by_rank(&mut pool);
    pool
}
