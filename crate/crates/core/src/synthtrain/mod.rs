//! Desk-scale self-training harness: a seeded synthetic video generator, a
//! linear snippet classifier trained with a top-k MIL loss, and scheduled
//! pseudo-label renewal (proposals, fusion, LP labels, Δ differencing).

mod data;
mod experiment;
mod model;
mod train;

pub use data::{generate_dataset, split_holdout, SynthConfig, MIN_SEGMENT_GAP};
pub use experiment::{run_experiment, CellResult, CellScores, ComparisonTable, Variant, VariantSummary};
pub use model::{forward, mil_loss, pooled_logits, sigmoid, topk_count, video_scores, ToyModel};
pub use train::{
    detect, evaluate, pseudo_label_for, train, EpochMetrics, LabelMode, MetricHistory, TrainSchedule,
};
