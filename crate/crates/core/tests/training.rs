use wstal_core::synthtrain::{
    generate_dataset, run_experiment, train, LabelMode, MetricHistory, SynthConfig, TrainSchedule, Variant,
};

fn small_data(seed: u64) -> Vec<wstal_core::VideoRecord> {
    generate_dataset(&SynthConfig {
        num_videos: 16,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn renewal_markers_follow_the_schedule() {
    let (_, hist) = train(&small_data(1), &TrainSchedule::default(), 1).unwrap();
    assert_eq!(hist.epochs.len(), 60);
    let renewed: Vec<usize> = hist
        .epochs
        .iter()
        .filter(|m| m.renewed)
        .map(|m| m.epoch)
        .collect();
    assert_eq!(renewed, vec![20, 25, 30, 35, 40, 45]);
    assert!(hist
        .epochs
        .iter()
        .all(|m| m.map_avg.is_finite() && (0.0..=1.0).contains(&m.map_avg)));
    let csv = hist.to_csv();
    assert_eq!(csv.lines().count(), 61);
    assert!(csv.starts_with(MetricHistory::CSV_HEADER));
}

#[test]
fn zero_weight_matches_pure_mil() {
    let data = small_data(2);
    let none = TrainSchedule {
        label_mode: LabelMode::None,
        ..Default::default()
    };
    let zero = TrainSchedule {
        delta_weight: 0.0,
        ..Default::default()
    };
    let (m1, h1) = train(&data, &none, 2).unwrap();
    let (m2, h2) = train(&data, &zero, 2).unwrap();
    assert_eq!(m1, m2);
    for (a, b) in h1.epochs.iter().zip(&h2.epochs) {
        assert_eq!(
            (a.mil_loss, a.map_030, a.map_050, a.map_070, a.map_avg),
            (b.mil_loss, b.map_030, b.map_050, b.map_070, b.map_avg)
        );
    }
    assert!(h1.epochs.iter().all(|m| m.delta_loss == 0.0 && !m.renewed));
}

#[test]
fn mil_loss_trend_is_downward_before_pseudo_labels() {
    for seed in 0..3 {
        let (_, hist) = train(&small_data(seed), &TrainSchedule::default(), seed).unwrap();
        let losses: Vec<f64> = hist.epochs[..20].iter().map(|m| m.mil_loss).collect();
        let avg: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        for w in avg.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: {avg:?}");
        }
    }
}

#[test]
fn training_is_deterministic() {
    let data = small_data(3);
    let schedule = TrainSchedule::default();
    let a = train(&data, &schedule, 3).unwrap();
    let b = train(&data, &schedule, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.1.to_csv(), b.1.to_csv());
}

#[test]
fn experiment_table_structure() {
    let synth = SynthConfig {
        num_videos: 12,
        ..Default::default()
    };
    let schedule = TrainSchedule {
        total_epochs: 12,
        pseudo_start_epoch: 4,
        renewal_epochs: vec![6, 8],
        ..Default::default()
    };
    let variants = vec![
        Variant::parse("nms").unwrap(),
        Variant::parse("gaussian").unwrap(),
    ];
    let table = run_experiment(&synth, &schedule, &variants, &[0, 1, 2]).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.summaries.len(), 2);
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), 1 + 6 + 2);
    assert!(table.rows.iter().all(|r| r.scores.map_avg.is_finite()));
    assert_eq!(
        table,
        run_experiment(&synth, &schedule, &variants, &[0, 1, 2]).unwrap()
    );
}
