use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use wstal_core::fusion::FusionMode;
use wstal_core::linpro::WeightMode;
use wstal_core::synthtrain::{LabelMode, SynthConfig, TrainSchedule};

use crate::error::{CliError, CliResult};
use crate::files::read_json;

/// Everything a subcommand may need. Loaded from `--config` (all sections
/// optional) and then overridden by individual flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub schedule: TrainSchedule,
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.synth.validate()?;
        self.schedule.validate()?;
        Ok(())
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Knobs {
    /// JSON file with optional `synth` and `schedule` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for data generation and model initialization [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Softmax temperature for fusion when generating pseudo labels [default: 0.1].
    #[arg(long, global = true)]
    pub train_temperature: Option<f64>,
    /// Softmax temperature for fusion of test-time detections [default: 0.03].
    #[arg(long, global = true)]
    pub test_temperature: Option<f64>,
    /// IoU above which proposals are grouped for fusion [default: 0.7].
    #[arg(long, global = true)]
    pub h_fuse: Option<f64>,
    /// Outer window ratio for contrast scores and LP constraints [default: 0.25].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// LP column weights: normalized | literal [default: normalized].
    #[arg(long, global = true)]
    pub w_mode: Option<WeightMode>,
    /// Fusion of grouped proposals: gaussian | uniform | nms [default: gaussian].
    #[arg(long, global = true)]
    pub fusion_mode: Option<FusionMode>,
    /// Training targets: none | raw_pseudo | delta_pseudo [default: delta_pseudo].
    #[arg(long, global = true)]
    pub label_mode: Option<LabelMode>,
    /// Weight of the pseudo-label loss [default: 1.0].
    #[arg(long, global = true)]
    pub delta_weight: Option<f64>,
}

impl Knobs {
    /// Config file (or defaults) with flag overrides applied, validated.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg: RunConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => RunConfig::default(),
        };
        let s = &mut cfg.schedule;
        if let Some(seed) = self.seed {
            cfg.synth.seed = seed;
        }
        if let Some(t) = self.train_temperature {
            s.fusion_cfg.temperature = t;
        }
        if let Some(t) = self.test_temperature {
            s.test_fusion_cfg.temperature = t;
        }
        if let Some(h) = self.h_fuse {
            s.fusion_cfg.h_fuse = h;
            s.test_fusion_cfg.h_fuse = h;
        }
        if let Some(a) = self.alpha {
            s.proposal_cfg.alpha = a;
        }
        if let Some(m) = self.w_mode {
            s.w_mode = m;
        }
        if let Some(m) = self.fusion_mode {
            s.fusion_cfg.mode = m;
            s.test_fusion_cfg.mode = m;
        }
        if let Some(m) = self.label_mode {
            s.label_mode = m;
        }
        if let Some(w) = self.delta_weight {
            s.delta_weight = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(e.to_string())
    }
}
