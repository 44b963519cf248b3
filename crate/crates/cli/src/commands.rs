use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use wstal_core::eval::{mean_ap, EvalResult};
use wstal_core::fusion::fuse;
use wstal_core::linpro::generate_pseudo_label;
use wstal_core::proposals::build_candidate_pool;
use wstal_core::synthtrain::{generate_dataset, run_experiment, train, ComparisonTable, Variant};
use wstal_core::types::sort_by_rank;
use wstal_core::{ActionInstance, GroundTruth};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::files::{
    ensure_dir, read_dataset, read_json, write_dataset, write_json, write_text, DetectionEntry, GtEntry,
    ModelFile, PerVideo, PseudoLabelFile, TcamFile,
};

pub fn synth(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let videos = generate_dataset(&cfg.synth)?;
    write_dataset(out, &videos, &cfg.synth)?;
    println!("wrote {} videos to {}", videos.len(), out.display());
    Ok(())
}

/// Proposals, fusion and pseudo labels for a single score map. Detections
/// use the test-time fusion settings, pseudo labels the training ones.
pub fn pipeline(cfg: &RunConfig, tcam_path: &Path, out: &Path) -> CliResult<()> {
    let (tcam, video_scores) = read_json::<TcamFile>(tcam_path)?.into_parts()?;
    let s = &cfg.schedule;
    let pool = build_candidate_pool(&tcam, &video_scores, &s.proposal_cfg);

    let mut detections = fuse(&pool, &s.test_fusion_cfg);
    sort_by_rank(&mut detections);
    let label = generate_pseudo_label(
        &fuse(&pool, &s.fusion_cfg),
        tcam.num_snippets(),
        tcam.num_classes(),
        s.proposal_cfg.alpha,
        s.w_mode,
    );
    if label.g.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("pseudo label has non-finite entries".into()));
    }

    ensure_dir(out)?;
    let entries: Vec<DetectionEntry> = detections.iter().map(DetectionEntry::from_core).collect();
    write_json(&out.join("detections.json"), &entries)?;
    write_json(
        &out.join("pseudo_labels.json"),
        &PseudoLabelFile::from_core(&label),
    )?;
    println!(
        "{} candidates, {} detections; wrote {}",
        pool.len(),
        detections.len(),
        out.display()
    );
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig, data: Option<&Path>, out: &Path) -> CliResult<()> {
    let videos = match data {
        Some(dir) => read_dataset(dir)?.0,
        None => generate_dataset(&cfg.synth)?,
    };
    let (model, history) = train(&videos, &cfg.schedule, cfg.synth.seed)?;
    ensure_dir(out)?;
    write_text(&out.join("metrics.csv"), &history.to_csv())?;
    write_json(&out.join("model.json"), &ModelFile::from_core(&model))?;
    write_json(&out.join("config.json"), cfg)?;
    if let Some(last) = history.last() {
        println!(
            "epoch {}: mAP@0.3 {:.4}  mAP@0.5 {:.4}  mAP@0.7 {:.4}  AVG {:.4}",
            last.epoch, last.map_030, last.map_050, last.map_070, last.map_avg
        );
    }
    Ok(())
}

pub fn experiment(
    cfg: &RunConfig,
    variants: &[String],
    num_seeds: usize,
    out: &Path,
) -> CliResult<ComparisonTable> {
    if num_seeds == 0 {
        return Err(CliError::input("`seeds` must be at least 1"));
    }
    let parsed = variants
        .iter()
        .map(|v| Variant::parse(v))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, v) in parsed.iter().enumerate() {
        if parsed[..i].iter().any(|p| p.name == v.name) {
            return Err(CliError::input(format!("variant `{}` listed twice", v.name)));
        }
    }
    let base = cfg.synth.seed;
    let seeds: Vec<u64> = (0..num_seeds as u64).map(|i| base + i).collect();
    let table = run_experiment(&cfg.synth, &cfg.schedule, &parsed, &seeds)?;
    ensure_dir(out)?;
    write_text(&out.join("comparison.csv"), &table.to_csv())?;
    for s in &table.summaries {
        println!(
            "{:<24} AVG {:.4} ± {:.4}   mAP@0.5 {:.4} ± {:.4}",
            s.variant, s.mean.map_avg, s.std.map_avg, s.mean.map_050, s.std.map_050
        );
    }
    Ok(table)
}

fn detections_from(entries: Vec<DetectionEntry>) -> CliResult<Vec<ActionInstance>> {
    let mut dets = entries
        .into_iter()
        .map(DetectionEntry::to_core)
        .collect::<CliResult<Vec<_>>>()?;
    sort_by_rank(&mut dets);
    Ok(dets)
}

fn ground_truth_from(entries: Vec<GtEntry>) -> CliResult<Vec<GroundTruth>> {
    entries.into_iter().map(GtEntry::to_core).collect()
}

type Aligned = (Vec<Vec<ActionInstance>>, Vec<Vec<GroundTruth>>);

/// Pairs detections with ground truth, either as one video or by video id.
/// Videos present only in the ground truth get no detections.
fn align(dets: PerVideo<DetectionEntry>, gts: PerVideo<GtEntry>) -> CliResult<Aligned> {
    match (dets, gts) {
        (PerVideo::Single(d), PerVideo::Single(g)) => {
            Ok((vec![detections_from(d)?], vec![ground_truth_from(g)?]))
        }
        (PerVideo::Many(mut d), PerVideo::Many(g)) => {
            if let Some(extra) = d.keys().find(|k| !g.contains_key(*k)) {
                return Err(CliError::input(format!("detections for unknown video `{extra}`")));
            }
            let mut all_d = Vec::with_capacity(g.len());
            let mut all_g = Vec::with_capacity(g.len());
            for (id, gt) in g {
                all_d.push(detections_from(d.remove(&id).unwrap_or_default())?);
                all_g.push(ground_truth_from(gt)?);
            }
            Ok((all_d, all_g))
        }
        _ => Err(CliError::input(
            "detections and ground truth must both be lists or both be keyed by video id",
        )),
    }
}

pub fn eval_csv(r: &EvalResult) -> String {
    let mut out = String::from("scope,iou,value\n");
    for (class, aps) in &r.per_class_ap {
        for (t, ap) in r.thresholds.iter().zip(aps) {
            let _ = writeln!(out, "class_{class},{t:?},{ap:?}");
        }
    }
    for (t, m) in r.thresholds.iter().zip(&r.map_at) {
        let _ = writeln!(out, "mAP,{t:?},{m:?}");
    }
    for (band, v) in [
        ("0.1:0.5", r.avg_01_05),
        ("0.3:0.7", r.avg_03_07),
        ("0.1:0.7", r.avg_01_07),
    ] {
        if let Some(v) = v {
            let _ = writeln!(out, "avg,{band},{v:?}");
        }
    }
    out
}

fn eval_table(r: &EvalResult) -> String {
    let mut out = String::from("class ");
    for t in &r.thresholds {
        let _ = write!(out, " {t:>6.2}");
    }
    out.push('\n');
    let rows = r
        .per_class_ap
        .iter()
        .map(|(c, aps)| (c.to_string(), aps))
        .chain(std::iter::once(("mAP".to_string(), &r.map_at)));
    for (name, vals) in rows {
        let _ = write!(out, "{name:<6}");
        for v in vals {
            let _ = write!(out, " {v:>6.4}");
        }
        out.push('\n');
    }
    let bands: BTreeMap<&str, Option<f64>> = BTreeMap::from([
        ("0.1:0.5", r.avg_01_05),
        ("0.3:0.7", r.avg_03_07),
        ("0.1:0.7", r.avg_01_07),
    ]);
    for (band, v) in bands {
        if let Some(v) = v {
            let _ = writeln!(out, "AVG({band}) {v:.4}");
        }
    }
    out
}

pub fn eval(
    cfg: &RunConfig,
    detections: &Path,
    ground_truth: &Path,
    thresholds: &[f64],
    out: &Path,
) -> CliResult<EvalResult> {
    let thresholds = if thresholds.is_empty() {
        cfg.schedule.eval_thresholds.clone()
    } else {
        thresholds.to_vec()
    };
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::input(format!("`thresholds`: {t} is outside [0, 1]")));
    }
    let (dets, gts) = align(read_json(detections)?, read_json(ground_truth)?)?;
    let result = mean_ap(&dets, &gts, &thresholds);
    ensure_dir(out)?;
    write_text(&out.join("eval.csv"), &eval_csv(&result))?;
    print!("{}", eval_table(&result));
    Ok(result)
}
