//! Temporal action localization post-processing and pseudo-label generation.
//!
//! The pipeline turns a temporal class activation map into candidate action
//! instances ([`proposals`]), merges overlapping candidates with Gaussian
//! weighted instance fusion ([`fusion`]), converts the fused boundaries into
//! snippet-level pseudo labels by ℓ1 minimization ([`linpro`]), and trains on
//! the change between consecutive label generations ([`delta`]). [`eval`]
//! scores detections with mAP over IoU thresholds and [`synthtrain`] runs the
//! whole loop on synthetic data.

pub mod delta;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod linpro;
pub mod proposals;
pub mod synthtrain;
pub mod types;

pub use error::{Error, Result};
pub use types::{temporal_iou, ActionInstance, GroundTruth, Tcam, TemporalInterval, VideoRecord};
