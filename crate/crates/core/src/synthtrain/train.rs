use std::fmt::Write as _;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::delta::{delta_ce_grad, delta_ce_loss, LabelHistory};
use crate::error::{Error, Result};
use crate::eval::{default_thresholds, mean_ap, EvalResult};
use crate::fusion::{fuse, FusionConfig};
use crate::linpro::{generate_pseudo_label, PseudoLabel, WeightMode};
use crate::proposals::{build_candidate_pool, ProposalConfig};
use crate::types::{ActionInstance, Tcam, VideoRecord};

use super::data::split_holdout;
use super::model::{mil_loss, video_scores, ToyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    None,
    RawPseudo,
    #[default]
    DeltaPseudo,
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "raw_pseudo" => Ok(Self::RawPseudo),
            "delta_pseudo" => Ok(Self::DeltaPseudo),
            other => Err(Error::config(
                "label_mode",
                format!("unknown mode `{other}` (expected none, raw_pseudo or delta_pseudo)"),
            )),
        }
    }
}

impl std::fmt::Display for LabelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::RawPseudo => "raw_pseudo",
            Self::DeltaPseudo => "delta_pseudo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub total_epochs: usize,
    pub pseudo_start_epoch: usize,
    pub renewal_epochs: Vec<usize>,
    pub learning_rate: f64,
    pub topk_ratio: f64,
    pub delta_weight: f64,
    /// Fusion used when generating pseudo labels.
    pub fusion_cfg: FusionConfig,
    /// Fusion used when producing held-out detections.
    pub test_fusion_cfg: FusionConfig,
    pub proposal_cfg: ProposalConfig,
    pub label_mode: LabelMode,
    pub w_mode: WeightMode,
    pub eval_thresholds: Vec<f64>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            total_epochs: 60,
            pseudo_start_epoch: 20,
            renewal_epochs: vec![25, 30, 35, 40, 45],
            learning_rate: 0.05,
            topk_ratio: 0.125,
            delta_weight: 1.0,
            fusion_cfg: FusionConfig::training(),
            test_fusion_cfg: FusionConfig::testing(),
            proposal_cfg: ProposalConfig::default(),
            label_mode: LabelMode::DeltaPseudo,
            w_mode: WeightMode::Normalized,
            eval_thresholds: default_thresholds(),
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let first = self.renewal_epochs.first().copied().unwrap_or(self.total_epochs);
        if !self.renewal_epochs.is_empty() && !(self.pseudo_start_epoch < first && first < self.total_epochs)
        {
            return Err(Error::config(
                "renewal_epochs",
                "need pseudo_start_epoch < first renewal < total_epochs",
            ));
        }
        if self.pseudo_start_epoch >= self.total_epochs {
            return Err(Error::config("pseudo_start_epoch", "must precede total_epochs"));
        }
        if self.renewal_epochs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("renewal_epochs", "must be strictly increasing"));
        }
        if self
            .renewal_epochs
            .last()
            .is_some_and(|&e| e >= self.total_epochs)
        {
            return Err(Error::config("renewal_epochs", "must fall before total_epochs"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.topk_ratio > 0.0 && self.topk_ratio <= 1.0) {
            return Err(Error::config("topk_ratio", "must lie in (0, 1]"));
        }
        if !self.delta_weight.is_finite() {
            return Err(Error::config("delta_weight", "must be finite"));
        }
        if self.eval_thresholds.is_empty() {
            return Err(Error::config("eval_thresholds", "must not be empty"));
        }
        self.fusion_cfg.validate()?;
        self.test_fusion_cfg.validate()?;
        self.proposal_cfg.validate()
    }

    pub fn is_label_epoch(&self, epoch: usize) -> bool {
        epoch == self.pseudo_start_epoch || self.renewal_epochs.contains(&epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mil_loss: f64,
    pub delta_loss: f64,
    pub map_030: f64,
    pub map_050: f64,
    pub map_070: f64,
    pub map_avg: f64,
    pub renewed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl MetricHistory {
    pub const CSV_HEADER: &'static str =
        "epoch,mil_loss,delta_loss,map_030,map_050,map_070,map_avg,renewed_flag";

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for m in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                m.epoch,
                m.mil_loss,
                m.delta_loss,
                m.map_030,
                m.map_050,
                m.map_070,
                m.map_avg,
                u8::from(m.renewed)
            );
        }
        out
    }
}

/// Held-out detections for one video: proposals on the action logits, gated
/// by pooled video scores, then fused with `fusion_cfg`.
pub fn detect(
    model: &ToyModel,
    video: &VideoRecord,
    proposal_cfg: &ProposalConfig,
    fusion_cfg: &FusionConfig,
    topk_ratio: f64,
) -> Result<Vec<ActionInstance>> {
    let pool = candidate_pool(model, video, proposal_cfg, topk_ratio)?;
    Ok(fuse(&pool, fusion_cfg))
}

fn candidate_pool(
    model: &ToyModel,
    video: &VideoRecord,
    proposal_cfg: &ProposalConfig,
    topk_ratio: f64,
) -> Result<Vec<ActionInstance>> {
    let logits = model.forward(&video.features)?;
    let k = model.num_classes();
    let tcam = Tcam::new(logits.slice(s![.., ..k]).to_owned())?;
    let scores = video_scores(&logits, k, topk_ratio);
    Ok(build_candidate_pool(&tcam, &scores, proposal_cfg))
}

/// Proposals, fusion and LP labels for one video.
pub fn pseudo_label_for(model: &ToyModel, video: &VideoRecord, schedule: &TrainSchedule) -> PseudoLabel {
    let fused = match candidate_pool(model, video, &schedule.proposal_cfg, schedule.topk_ratio) {
        Ok(pool) => fuse(&pool, &schedule.fusion_cfg),
        Err(e) => {
            log::warn!("{}: {e}; using a zero pseudo label", video.id);
            Vec::new()
        }
    };
    generate_pseudo_label(
        &fused,
        video.num_snippets(),
        model.num_classes(),
        schedule.proposal_cfg.alpha,
        schedule.w_mode,
    )
}

pub fn evaluate(model: &ToyModel, videos: &[&VideoRecord], schedule: &TrainSchedule) -> Result<EvalResult> {
    let mut dets = Vec::with_capacity(videos.len());
    for v in videos {
        dets.push(detect(
            model,
            v,
            &schedule.proposal_cfg,
            &schedule.test_fusion_cfg,
            schedule.topk_ratio,
        )?);
    }
    let gts: Vec<_> = videos.iter().map(|v| v.ground_truth.clone()).collect();
    Ok(mean_ap(&dets, &gts, &schedule.eval_thresholds))
}

fn check_dataset(dataset: &[VideoRecord]) -> Result<(usize, usize)> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::config("dataset", "must contain at least two videos"))?;
    let (d, k) = (first.features.ncols(), first.num_classes());
    for v in dataset {
        if v.features.ncols() != d || v.num_classes() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("d = {d}, K = {k}"),
                got: format!("{}: d = {}, K = {}", v.id, v.features.ncols(), v.num_classes()),
            });
        }
        v.validate()?;
    }
    Ok((d, k))
}

/// Full-batch gradient descent on the MIL loss, plus the pseudo-label loss
/// once labels exist. Metrics are computed on the held-out split after every
/// update.
pub fn train(
    dataset: &[VideoRecord],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(ToyModel, MetricHistory)> {
    schedule.validate()?;
    let (d, k) = check_dataset(dataset)?;
    let (train_idx, test_idx) = split_holdout(dataset, seed);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::config("dataset", "must contain at least two videos"));
    }
    let train_videos: Vec<&VideoRecord> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let test_videos: Vec<&VideoRecord> = test_idx.iter().map(|&i| &dataset[i]).collect();
    let n = train_videos.len() as f64;

    let mut model = ToyModel::init(d, k, seed);
    let mut histories = vec![LabelHistory::default(); train_videos.len()];
    let mut targets: Vec<Option<Array2<f64>>> = vec![None; train_videos.len()];
    let mut history = MetricHistory::default();

    for epoch in 0..schedule.total_epochs {
        let renewed = schedule.label_mode != LabelMode::None && schedule.is_label_epoch(epoch);
        if renewed {
            for (i, v) in train_videos.iter().enumerate() {
                let g = pseudo_label_for(&model, v, schedule);
                targets[i] = Some(match schedule.label_mode {
                    LabelMode::DeltaPseudo => histories[i].renew(g)?.dg,
                    _ => g.g,
                });
            }
        }

        let mut grad = ToyModel::zeros(d, k);
        let mut mil_total = 0.0;
        let mut delta_total = 0.0;
        for (v, target) in train_videos.iter().zip(&targets) {
            let logits = model.forward(&v.features)?;
            let (loss, mut dlogits) = mil_loss(&logits, &v.video_labels, schedule.topk_ratio)?;
            mil_total += loss;
            if let Some(t) = target {
                // Per-snippet mean, so the label loss does not scale with video length.
                let w = schedule.delta_weight / v.num_snippets() as f64;
                delta_total += delta_ce_loss(&logits, t, w)?;
                dlogits += &delta_ce_grad(&logits, t, w)?;
            }
            model.backward(&v.features, &dlogits, &mut grad);
        }
        grad.weights /= n;
        grad.bias /= n;
        model.step(&grad, schedule.learning_rate);
        if !model.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }

        let eval = evaluate(&model, &test_videos, schedule)?;
        let at = |t: f64| eval.map_at_threshold(t).unwrap_or(f64::NAN);
        history.epochs.push(EpochMetrics {
            epoch,
            mil_loss: mil_total / n,
            delta_loss: delta_total / n,
            map_030: at(0.3),
            map_050: at(0.5),
            map_070: at(0.7),
            map_avg: eval
                .avg_01_07
                .unwrap_or_else(|| eval.map_at.iter().sum::<f64>() / eval.map_at.len() as f64),
            renewed,
        });
    }
    Ok((model, history))
}
