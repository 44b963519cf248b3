mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{max_paired_deviation, random_pool, reference_groups};
use wstal_core::fusion::{fuse, gaussian_weighted_fusion, nms, FusionConfig, FusionMode};
use wstal_core::ActionInstance;

fn cfg(temperature: f64, mode: FusionMode) -> FusionConfig {
    FusionConfig {
        h_fuse: 0.7,
        temperature,
        mode,
    }
}

fn group_mean(g: &[ActionInstance]) -> ActionInstance {
    let n = g.len() as f64;
    let mean = |f: fn(&ActionInstance) -> f64| g.iter().map(f).sum::<f64>() / n;
    ActionInstance::new(
        g[0].class_id,
        mean(|a| a.confidence),
        mean(|a| a.start()),
        mean(|a| a.end()),
    )
    .unwrap()
}

#[test]
fn cold_fusion_is_nms() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let pool = random_pool(&mut rng);
        let fused = gaussian_weighted_fusion(&pool, &cfg(1e-6, FusionMode::Gaussian));
        let kept = nms(&pool, 0.7);
        assert!(max_paired_deviation(&kept, &fused) <= 1e-6);
        let seeds: Vec<ActionInstance> = reference_groups(&pool, 0.7).iter().map(|g| g[0]).collect();
        assert!(max_paired_deviation(&seeds, &kept) == 0.0);
    }
}

#[test]
fn hot_fusion_is_group_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..100 {
        let pool = random_pool(&mut rng);
        let means: Vec<ActionInstance> = reference_groups(&pool, 0.7)
            .iter()
            .map(|g| group_mean(g))
            .collect();
        let hot = fuse(&pool, &cfg(1e6, FusionMode::Gaussian));
        assert!(max_paired_deviation(&means, &hot) <= 1e-6);
        let uniform = fuse(&pool, &cfg(1.0, FusionMode::Uniform));
        assert!(max_paired_deviation(&means, &uniform) <= 1e-12);
    }
}

#[test]
fn fused_fields_stay_within_group_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for t in [1e-3, 0.03, 0.1, 1.0, 10.0] {
        for _ in 0..50 {
            let pool = random_pool(&mut rng);
            let groups = reference_groups(&pool, 0.7);
            let fused = fuse(&pool, &cfg(t, FusionMode::Gaussian));
            assert_eq!(fused.len(), groups.len());
            for f in &fused {
                // Each output lies inside the envelope of some group of its class.
                let inside = groups.iter().filter(|g| g[0].class_id == f.class_id).any(|g| {
                    let within = |v: f64, field: fn(&ActionInstance) -> f64| {
                        let lo = g.iter().map(field).fold(f64::INFINITY, f64::min);
                        let hi = g.iter().map(field).fold(f64::NEG_INFINITY, f64::max);
                        lo <= v && v <= hi
                    };
                    within(f.confidence, |a| a.confidence)
                        && within(f.start(), |a| a.start())
                        && within(f.end(), |a| a.end())
                });
                assert!(inside, "T = {t}: {f:?}");
            }
        }
    }
}
