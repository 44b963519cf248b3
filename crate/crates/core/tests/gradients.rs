mod support;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use support::{numeric_gradient, relative_error};
use wstal_core::delta::{delta_ce_grad, delta_ce_loss};
use wstal_core::synthtrain::mil_loss;

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, dist: impl Distribution<f64>) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

#[test]
fn delta_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (l, k) = (rng.random_range(1..=8), rng.random_range(1..=5));
        let logits = random_matrix(&mut rng, l, k + 1, Normal::new(0.0, 2.0).unwrap());
        let dg = random_matrix(&mut rng, l, k, Uniform::new(-1.0, 1.0).unwrap());
        let w = rng.random_range(0.1..2.0);
        let analytic = delta_ce_grad(&logits, &dg, w).unwrap();
        let numeric = numeric_gradient(&logits, 1e-6, |z| delta_ce_loss(z, &dg, w).unwrap());
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn mil_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (l, k) = (rng.random_range(1..=40), rng.random_range(1..=5));
        let logits = random_matrix(&mut rng, l, k + 1, Normal::new(0.0, 2.0).unwrap());
        let labels: Vec<u8> = (0..k).map(|_| rng.random_range(0..=1)).collect();
        let ratio = rng.random_range(0.05..=1.0);
        let (_, analytic) = mil_loss(&logits, &labels, ratio).unwrap();
        let numeric = numeric_gradient(&logits, 1e-6, |z| mil_loss(z, &labels, ratio).unwrap().0);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    assert!(worst < 1e-4, "{worst}");
}
