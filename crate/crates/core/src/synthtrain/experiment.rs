use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionMode;

use super::data::{generate_dataset, SynthConfig};
use super::train::{train, LabelMode, TrainSchedule};

/// A named set of overrides applied to a base schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Variant {
    pub name: String,
    pub label_mode: Option<LabelMode>,
    pub train_fusion_mode: Option<FusionMode>,
    pub test_fusion_mode: Option<FusionMode>,
    pub train_temperature: Option<f64>,
    pub test_temperature: Option<f64>,
}

impl Variant {
    /// Parses names such as `nms`, `delta_pseudo`, `train-t=0.05` or
    /// combinations joined with `+` (`raw_pseudo+nms`).
    ///
    /// Bare fusion modes act on test-time post-processing; `train-` prefixed
    /// modes act on pseudo-label generation.
    pub fn parse(name: &str) -> Result<Self> {
        let mut v = Variant {
            name: name.to_string(),
            ..Default::default()
        };
        for part in name.split('+').map(str::trim) {
            if let Ok(mode) = part.parse::<FusionMode>() {
                v.test_fusion_mode = Some(mode);
            } else if let Ok(mode) = part.parse::<LabelMode>() {
                v.label_mode = Some(mode);
            } else if let Some(mode) = part
                .strip_prefix("train-")
                .and_then(|m| m.parse::<FusionMode>().ok())
            {
                v.train_fusion_mode = Some(mode);
            } else if let Some(t) = part.strip_prefix("train-t=") {
                v.train_temperature = Some(parse_temperature(t)?);
            } else if let Some(t) = part.strip_prefix("test-t=") {
                v.test_temperature = Some(parse_temperature(t)?);
            } else {
                return Err(Error::config(
                    "variants",
                    format!("unknown variant component `{part}`"),
                ));
            }
        }
        Ok(v)
    }

    pub fn apply(&self, base: &TrainSchedule) -> TrainSchedule {
        let mut s = base.clone();
        if let Some(m) = self.label_mode {
            s.label_mode = m;
        }
        if let Some(m) = self.train_fusion_mode {
            s.fusion_cfg.mode = m;
        }
        if let Some(m) = self.test_fusion_mode {
            s.test_fusion_cfg.mode = m;
        }
        if let Some(t) = self.train_temperature {
            s.fusion_cfg.temperature = t;
        }
        if let Some(t) = self.test_temperature {
            s.test_fusion_cfg.temperature = t;
        }
        s
    }
}

fn parse_temperature(t: &str) -> Result<f64> {
    match t.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::config("variants", format!("bad temperature `{t}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub map_030: f64,
    pub map_050: f64,
    pub map_070: f64,
    pub map_avg: f64,
}

impl CellScores {
    fn as_array(&self) -> [f64; 4] {
        [self.map_030, self.map_050, self.map_070, self.map_avg]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: String,
    pub seed: u64,
    pub scores: CellScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub mean: CellScores,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub std: CellScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<CellResult>,
    pub summaries: Vec<VariantSummary>,
}

impl ComparisonTable {
    pub const CSV_HEADER: &'static str = "variant,seed,map_030,map_050,map_070,map_avg";

    pub fn summary(&self, variant: &str) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let s = r.scores;
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{:?},{:?}",
                r.variant, r.seed, s.map_030, s.map_050, s.map_070, s.map_avg
            );
        }
        for s in &self.summaries {
            let cells: Vec<String> = s
                .mean
                .as_array()
                .iter()
                .zip(s.std.as_array())
                .map(|(m, sd)| format!("{m:.6}±{sd:.6}"))
                .collect();
            let _ = writeln!(out, "{},mean±std,{}", s.variant, cells.join(","));
        }
        out
    }
}

fn summarize(variant: &str, cells: &[&CellResult]) -> VariantSummary {
    let n = cells.len() as f64;
    let mut mean = [0.0; 4];
    for c in cells {
        for (m, v) in mean.iter_mut().zip(c.scores.as_array()) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 4];
    if cells.len() > 1 {
        for c in cells {
            for ((s, v), m) in var.iter_mut().zip(c.scores.as_array()).zip(mean) {
                *s += (v - m).powi(2) / (n - 1.0);
            }
        }
    }
    let to = |a: [f64; 4]| CellScores {
        map_030: a[0],
        map_050: a[1],
        map_070: a[2],
        map_avg: a[3],
    };
    VariantSummary {
        variant: variant.to_string(),
        mean: to(mean),
        std: to(var.map(f64::sqrt)),
    }
}

/// Trains every (variant, seed) cell on the dataset generated from that seed
/// and reports final-epoch held-out scores. Cells run in parallel; each cell
/// is deterministic, so the table is too.
pub fn run_experiment(
    synth: &SynthConfig,
    base: &TrainSchedule,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<ComparisonTable> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::config(
            "variants",
            "need at least one variant and one seed",
        ));
    }
    let cells: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(vi, seed)| {
            let cfg = SynthConfig {
                seed,
                ..synth.clone()
            };
            let data = generate_dataset(&cfg)?;
            let schedule = variants[vi].apply(base);
            let (_, hist) = train(&data, &schedule, seed)?;
            let last = hist.last().expect("at least one epoch");
            Ok(CellResult {
                variant: variants[vi].name.clone(),
                seed,
                scores: CellScores {
                    map_030: last.map_030,
                    map_050: last.map_050,
                    map_070: last.map_070,
                    map_avg: last.map_avg,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = variants
        .iter()
        .map(|v| {
            let cells: Vec<&CellResult> = rows.iter().filter(|r| r.variant == v.name).collect();
            summarize(&v.name, &cells)
        })
        .collect();
    Ok(ComparisonTable { rows, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_parsing() {
        let v = Variant::parse("raw_pseudo+nms").unwrap();
        assert_eq!(v.label_mode, Some(LabelMode::RawPseudo));
        assert_eq!(v.test_fusion_mode, Some(FusionMode::Nms));
        let v = Variant::parse("train-t=0.05").unwrap();
        assert_eq!(v.train_temperature, Some(0.05));
        let v = Variant::parse("train-uniform").unwrap();
        assert_eq!(v.train_fusion_mode, Some(FusionMode::Uniform));
        assert!(Variant::parse("softnms").is_err());
        assert!(Variant::parse("train-t=-1").is_err());
    }

    #[test]
    fn summary_statistics() {
        let mk = |seed, v| CellResult {
            variant: "a".into(),
            seed,
            scores: CellScores {
                map_030: v,
                map_050: v,
                map_070: v,
                map_avg: v,
            },
        };
        let (a, b) = (mk(0, 0.2), mk(1, 0.4));
        let s = summarize("a", &[&a, &b]);
        assert!((s.mean.map_avg - 0.3).abs() < 1e-15);
        assert!((s.std.map_avg - 0.02f64.sqrt()).abs() < 1e-15);
    }
}
