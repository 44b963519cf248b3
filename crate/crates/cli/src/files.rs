//! On-disk formats. Matrices are stored row-major as flat arrays next to
//! their dimensions; floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wstal_core::linpro::PseudoLabel;
use wstal_core::synthtrain::{SynthConfig, ToyModel};
use wstal_core::{ActionInstance, GroundTruth, Tcam, TemporalInterval, VideoRecord};

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn to_matrix(field: &str, rows: usize, cols: usize, flat: Vec<f64>) -> CliResult<Array2<f64>> {
    if flat.len() != rows * cols {
        return Err(CliError::input(format!(
            "`{field}` has {} values, expected {rows} x {cols} = {}",
            flat.len(),
            rows * cols
        )));
    }
    Array2::from_shape_vec((rows, cols), flat).map_err(|e| CliError::input(format!("`{field}`: {e}")))
}

fn flatten(m: &Array2<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtEntry {
    pub class: usize,
    pub start: f64,
    pub end: f64,
}

impl GtEntry {
    pub fn to_core(self) -> CliResult<GroundTruth> {
        Ok(GroundTruth {
            class_id: self.class,
            interval: TemporalInterval::new(self.start, self.end)?,
        })
    }

    pub fn from_core(g: &GroundTruth) -> Self {
        Self {
            class: g.class_id,
            start: g.interval.start,
            end: g.interval.end,
        }
    }
}

/// One synthetic video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoFile {
    pub id: String,
    pub l: usize,
    /// `l x d`, row-major.
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub ground_truth: Vec<GtEntry>,
}

impl VideoFile {
    pub fn from_record(v: &VideoRecord) -> Self {
        Self {
            id: v.id.clone(),
            l: v.num_snippets(),
            features: flatten(&v.features),
            labels: v.video_labels.clone(),
            ground_truth: v.ground_truth.iter().map(GtEntry::from_core).collect(),
        }
    }

    pub fn into_record(self) -> CliResult<VideoRecord> {
        if self.l == 0 || !self.features.len().is_multiple_of(self.l) {
            return Err(CliError::input(format!(
                "{}: `features` length {} is not a multiple of l = {}",
                self.id,
                self.features.len(),
                self.l
            )));
        }
        let d = self.features.len() / self.l;
        let record = VideoRecord {
            features: to_matrix("features", self.l, d, self.features)?,
            video_labels: self.labels,
            ground_truth: self
                .ground_truth
                .into_iter()
                .map(GtEntry::to_core)
                .collect::<CliResult<_>>()?,
            id: self.id,
        };
        record.validate()?;
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub num_videos: usize,
    /// File names relative to the manifest.
    pub videos: Vec<String>,
    pub config: SynthConfig,
}

pub fn write_dataset(dir: &Path, videos: &[VideoRecord], cfg: &SynthConfig) -> CliResult<()> {
    ensure_dir(dir)?;
    let mut names = Vec::with_capacity(videos.len());
    for v in videos {
        let name = format!("{}.json", v.id);
        write_json(&dir.join(&name), &VideoFile::from_record(v))?;
        names.push(name);
    }
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            num_videos: videos.len(),
            videos: names,
            config: cfg.clone(),
        },
    )
}

pub fn read_dataset(dir: &Path) -> CliResult<(Vec<VideoRecord>, Manifest)> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let videos = manifest
        .videos
        .iter()
        .map(|name| read_json::<VideoFile>(&dir.join(name))?.into_record())
        .collect::<CliResult<Vec<_>>>()?;
    Ok((videos, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcamFile {
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// `l x K`, row-major.
    pub scores: Vec<f64>,
    /// Video-level class scores for gating; every class passes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_scores: Option<Vec<f64>>,
}

impl TcamFile {
    pub fn into_parts(self) -> CliResult<(Tcam, Vec<f64>)> {
        if self.l == 0 || self.k == 0 {
            return Err(CliError::input("`l` and `K` must be positive"));
        }
        let tcam = Tcam::new(to_matrix("scores", self.l, self.k, self.scores)?)?;
        let video_scores = self.video_scores.unwrap_or_else(|| vec![1.0; self.k]);
        if video_scores.len() != self.k {
            return Err(CliError::input(format!(
                "`video_scores` has {} entries, expected K = {}",
                video_scores.len(),
                self.k
            )));
        }
        Ok((tcam, video_scores))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionEntry {
    pub class: usize,
    pub confidence: f64,
    pub start: f64,
    pub end: f64,
}

impl DetectionEntry {
    pub fn from_core(a: &ActionInstance) -> Self {
        Self {
            class: a.class_id,
            confidence: a.confidence,
            start: a.start(),
            end: a.end(),
        }
    }

    pub fn to_core(self) -> CliResult<ActionInstance> {
        Ok(ActionInstance::new(
            self.class,
            self.confidence,
            self.start,
            self.end,
        )?)
    }
}

/// A list for a single video, or lists keyed by video id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerVideo<T> {
    Single(Vec<T>),
    Many(BTreeMap<String, Vec<T>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoLabelFile {
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// `l x K`, row-major.
    #[serde(rename = "G")]
    pub g: Vec<f64>,
}

impl PseudoLabelFile {
    pub fn from_core(p: &PseudoLabel) -> Self {
        Self {
            l: p.g.nrows(),
            k: p.g.ncols(),
            g: flatten(&p.g),
        }
    }

    pub fn into_core(self) -> CliResult<PseudoLabel> {
        Ok(PseudoLabel::new(to_matrix("G", self.l, self.k, self.g)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub feature_dim: usize,
    pub num_classes: usize,
    /// `feature_dim x (num_classes + 1)`, row-major; the last column is background.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelFile {
    pub fn from_core(m: &ToyModel) -> Self {
        Self {
            feature_dim: m.feature_dim(),
            num_classes: m.num_classes(),
            weights: flatten(&m.weights),
            bias: m.bias.to_vec(),
        }
    }

    pub fn into_core(self) -> CliResult<ToyModel> {
        let cols = self.num_classes + 1;
        if self.bias.len() != cols {
            return Err(CliError::input(format!(
                "`bias` has {} entries, expected {cols}",
                self.bias.len()
            )));
        }
        Ok(ToyModel {
            weights: to_matrix("weights", self.feature_dim, cols, self.weights)?,
            bias: Array1::from(self.bias),
        })
    }
}
