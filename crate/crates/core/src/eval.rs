//! Temporal detection evaluation: greedy matching, all-points interpolated AP
//! and mAP over IoU thresholds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{rank_order, temporal_iou, ActionInstance, GroundTruth};

/// Default thresholds 0.1, 0.2, ..., 0.7.
pub fn default_thresholds() -> Vec<f64> {
    (1..=7).map(|i| i as f64 / 10.0).collect()
}

/// TP/FP flag per detection. `dets` must already be in rank order; each
/// detection claims the unmatched same-class ground truth it overlaps most,
/// provided that IoU reaches `iou_thresh`.
pub fn match_detections(dets: &[ActionInstance], gts: &[GroundTruth], iou_thresh: f64) -> Vec<bool> {
    let mut used = vec![false; gts.len()];
    dets.iter()
        .map(|d| claim(d, gts, &mut used, iou_thresh))
        .collect()
}

fn claim(d: &ActionInstance, gts: &[GroundTruth], used: &mut [bool], iou_thresh: f64) -> bool {
    let mut best: Option<(usize, f64)> = None;
    for (i, gt) in gts.iter().enumerate() {
        if used[i] || gt.class_id != d.class_id {
            continue;
        }
        let iou = temporal_iou(&d.interval, &gt.interval);
        if iou >= iou_thresh && best.is_none_or(|(_, b)| iou > b) {
            best = Some((i, iou));
        }
    }
    match best {
        Some((i, _)) => {
            used[i] = true;
            true
        }
        None => false,
    }
}

/// All-points interpolated AP. Returns `None` when `num_gt == 0`.
pub fn average_precision(flags: &[bool], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    for (i, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    Some(ap.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub thresholds: Vec<f64>,
    /// AP per class, aligned with `thresholds`. Classes without ground truth
    /// are absent.
    pub per_class_ap: BTreeMap<usize, Vec<f64>>,
    /// mAP per threshold, aligned with `thresholds`.
    pub map_at: Vec<f64>,
    pub avg_01_05: Option<f64>,
    pub avg_03_07: Option<f64>,
    pub avg_01_07: Option<f64>,
}

impl EvalResult {
    pub fn map_at_threshold(&self, t: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|x| (x - t).abs() < 1e-9)
            .map(|i| self.map_at[i])
    }

    /// Mean mAP over `lo, lo + 0.1, ..., hi`, if all of them were evaluated.
    pub fn band_average(&self, lo: f64, hi: f64) -> Option<f64> {
        let steps = ((hi - lo) / 0.1).round() as usize;
        let vals: Option<Vec<f64>> = (0..=steps)
            .map(|i| self.map_at_threshold(lo + 0.1 * i as f64))
            .collect();
        vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Pools detections across videos per class and evaluates every threshold.
pub fn mean_ap(
    dets_per_video: &[Vec<ActionInstance>],
    gts_per_video: &[Vec<GroundTruth>],
    thresholds: &[f64],
) -> EvalResult {
    assert_eq!(
        dets_per_video.len(),
        gts_per_video.len(),
        "one ground-truth list per video"
    );
    let mut classes: BTreeMap<usize, usize> = BTreeMap::new();
    for gts in gts_per_video {
        for gt in gts {
            *classes.entry(gt.class_id).or_default() += 1;
        }
    }

    let mut per_class_ap = BTreeMap::new();
    for (&c, &num_gt) in &classes {
        let mut pooled: Vec<(usize, ActionInstance)> = dets_per_video
            .iter()
            .enumerate()
            .flat_map(|(v, ds)| ds.iter().filter(|d| d.class_id == c).map(move |d| (v, *d)))
            .collect();
        pooled.sort_by(|a, b| rank_order(&a.1, &b.1).then(a.0.cmp(&b.0)));
        let class_gts: Vec<Vec<GroundTruth>> = gts_per_video
            .iter()
            .map(|g| g.iter().filter(|gt| gt.class_id == c).copied().collect())
            .collect();
        let aps = thresholds
            .iter()
            .map(|&t| {
                let mut used: Vec<Vec<bool>> = class_gts.iter().map(|g| vec![false; g.len()]).collect();
                let flags: Vec<bool> = pooled
                    .iter()
                    .map(|(v, d)| claim(d, &class_gts[*v], &mut used[*v], t))
                    .collect();
                average_precision(&flags, num_gt).unwrap_or(0.0)
            })
            .collect::<Vec<_>>();
        per_class_ap.insert(c, aps);
    }

    let map_at: Vec<f64> = (0..thresholds.len())
        .map(|i| {
            if per_class_ap.is_empty() {
                0.0
            } else {
                per_class_ap.values().map(|aps| aps[i]).sum::<f64>() / per_class_ap.len() as f64
            }
        })
        .collect();
    let mut result = EvalResult {
        thresholds: thresholds.to_vec(),
        per_class_ap,
        map_at,
        avg_01_05: None,
        avg_03_07: None,
        avg_01_07: None,
    };
    result.avg_01_05 = result.band_average(0.1, 0.5);
    result.avg_03_07 = result.band_average(0.3, 0.7);
    result.avg_01_07 = result.band_average(0.1, 0.7);
    result
}
