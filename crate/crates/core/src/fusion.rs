//! Gaussian weighted instance fusion and its baselines.
//!
//! Fusion works like greedy NMS: take the most confident remaining instance,
//! collect everything of the same class whose IoU with it exceeds `h_fuse`,
//! and remove that group from the pool. Instead of keeping only the seed, the
//! group is replaced by the mean of its members' `(confidence, start, end)`
//! under a softmax over confidences at temperature `T`. A Gaussian fit to
//! samples drawn with those probabilities has exactly these means.
//!
//! [`FusionMode::Uniform`] weights every member equally and
//! [`FusionMode::Nms`] keeps the seed unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{rank_order, sort_by_rank, temporal_iou, ActionInstance, TemporalInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    #[default]
    Gaussian,
    Uniform,
    Nms,
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "nms" => Ok(Self::Nms),
            other => Err(Error::config(
                "fusion_mode",
                format!("unknown mode `{other}` (expected gaussian, uniform or nms)"),
            )),
        }
    }
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Uniform => "uniform",
            Self::Nms => "nms",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub h_fuse: f64,
    pub temperature: f64,
    pub mode: FusionMode,
}

impl FusionConfig {
    pub const DEFAULT_H_FUSE: f64 = 0.7;
    pub const TRAIN_TEMPERATURE: f64 = 0.1;
    pub const TEST_TEMPERATURE: f64 = 0.03;

    pub fn training() -> Self {
        Self {
            h_fuse: Self::DEFAULT_H_FUSE,
            temperature: Self::TRAIN_TEMPERATURE,
            mode: FusionMode::Gaussian,
        }
    }

    pub fn testing() -> Self {
        Self {
            temperature: Self::TEST_TEMPERATURE,
            ..Self::training()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_fuse > 0.0 && self.h_fuse < 1.0) {
            return Err(Error::config("h_fuse", "must lie in (0, 1)"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature", "must be positive"));
        }
        Ok(())
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self::training()
    }
}

/// Softmax of `q / T`, shifted by the maximum so large logits cannot overflow.
pub fn sampling_weights(confidences: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if confidences.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::config("temperature", "must be positive"));
    }
    let max = confidences.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = confidences
        .iter()
        .map(|q| ((q - max) / temperature).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

fn check_group(group: &[ActionInstance]) -> Result<usize> {
    let first = group.first().ok_or(Error::EmptyGroup)?;
    if let Some(other) = group.iter().find(|a| a.class_id != first.class_id) {
        return Err(Error::MixedClasses(first.class_id, other.class_id));
    }
    Ok(first.class_id)
}

fn weighted_instance(class_id: usize, group: &[ActionInstance], w: &[f64]) -> ActionInstance {
    let mut q = 0.0;
    let mut s = 0.0;
    let mut e = 0.0;
    for (a, g) in group.iter().zip(w) {
        q += g * a.confidence;
        s += g * a.start();
        e += g * a.end();
    }
    // Rounding can push a convex combination a hair past its extremes.
    let clamp = |v: f64, f: fn(&ActionInstance) -> f64| {
        let lo = group.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = group.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        v.clamp(lo, hi)
    };
    let start = clamp(s, |a| a.start());
    let end = clamp(e, |a| a.end()).max(start);
    ActionInstance {
        class_id,
        confidence: clamp(q, |a| a.confidence),
        interval: TemporalInterval { start, end },
    }
}

/// Softmax-weighted mean of a same-class group.
pub fn fuse_group(group: &[ActionInstance], temperature: f64) -> Result<ActionInstance> {
    let class_id = check_group(group)?;
    let confidences: Vec<f64> = group.iter().map(|a| a.confidence).collect();
    let w = sampling_weights(&confidences, temperature)?;
    Ok(weighted_instance(class_id, group, &w))
}

/// Unweighted mean of a same-class group.
pub fn uniform_group(group: &[ActionInstance]) -> Result<ActionInstance> {
    let class_id = check_group(group)?;
    let w = vec![1.0 / group.len() as f64; group.len()];
    Ok(weighted_instance(class_id, group, &w))
}

/// Splits the pool per class and repeatedly peels off the group around the
/// best remaining instance, handing each group (seed first) to `reduce`.
fn greedy_groups<F>(pool: &[ActionInstance], iou_threshold: f64, mut reduce: F) -> Vec<ActionInstance>
where
    F: FnMut(&[ActionInstance]) -> ActionInstance,
{
    let mut by_class: BTreeMap<usize, Vec<ActionInstance>> = BTreeMap::new();
    for a in pool {
        by_class.entry(a.class_id).or_default().push(*a);
    }
    let mut out = Vec::new();
    for (_, mut remaining) in by_class {
        sort_by_rank(&mut remaining);
        while !remaining.is_empty() {
            let seed = remaining[0];
            let (group, rest): (Vec<_>, Vec<_>) = remaining
                .into_iter()
                .enumerate()
                .partition(|(i, a)| *i == 0 || temporal_iou(&a.interval, &seed.interval) > iou_threshold);
            let group: Vec<ActionInstance> = group.into_iter().map(|(_, a)| a).collect();
            out.push(reduce(&group));
            remaining = rest.into_iter().map(|(_, a)| a).collect();
        }
    }
    out.sort_by(rank_order);
    out
}

/// Greedy per-class non-maximum suppression.
pub fn nms(pool: &[ActionInstance], iou_threshold: f64) -> Vec<ActionInstance> {
    greedy_groups(pool, iou_threshold, |g| g[0])
}

/// Gaussian weighted instance fusion at `cfg.h_fuse` and `cfg.temperature`.
pub fn gaussian_weighted_fusion(pool: &[ActionInstance], cfg: &FusionConfig) -> Vec<ActionInstance> {
    greedy_groups(pool, cfg.h_fuse, |g| {
        fuse_group(g, cfg.temperature).expect("groups are non-empty and single-class")
    })
}

/// Dispatches on `cfg.mode`.
pub fn fuse(pool: &[ActionInstance], cfg: &FusionConfig) -> Vec<ActionInstance> {
    match cfg.mode {
        FusionMode::Gaussian => gaussian_weighted_fusion(pool, cfg),
        FusionMode::Uniform => greedy_groups(pool, cfg.h_fuse, |g| {
            uniform_group(g).expect("groups are non-empty and single-class")
        }),
        FusionMode::Nms => nms(pool, cfg.h_fuse),
    }
}
