use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Linear snippet classifier over `K + 1` outputs (last one is background).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    /// `d x (K + 1)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ToyModel {
    pub fn zeros(feature_dim: usize, num_classes: usize) -> Self {
        Self {
            weights: Array2::zeros((feature_dim, num_classes + 1)),
            bias: Array1::zeros(num_classes + 1),
        }
    }

    /// Small Gaussian weights (std 0.01), zero bias.
    pub fn init(feature_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.01).expect("valid std");
        let mut m = Self::zeros(feature_dim, num_classes);
        m.weights.mapv_inplace(|_| normal.sample(&mut rng));
        m
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len() - 1
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        forward(self, features)
    }

    /// Accumulates `X^T dZ` and the column sums of `dZ` into `grad`.
    pub fn backward(&self, features: &Array2<f64>, dlogits: &Array2<f64>, grad: &mut ToyModel) {
        grad.weights += &features.t().dot(dlogits);
        grad.bias += &dlogits.sum_axis(Axis(0));
    }

    pub fn step(&mut self, grad: &ToyModel, lr: f64) {
        self.weights.scaled_add(-lr, &grad.weights);
        self.bias.scaled_add(-lr, &grad.bias);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// `features · weights + bias`, one row of logits per snippet.
pub fn forward(model: &ToyModel, features: &Array2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != model.feature_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} feature columns", model.feature_dim()),
            got: features.ncols().to_string(),
        });
    }
    Ok(features.dot(&model.weights) + &model.bias)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn topk_count(len: usize, topk_ratio: f64) -> usize {
    ((topk_ratio * len as f64).floor() as usize).clamp(1, len.max(1))
}

/// Indices of the `k` largest entries (ties resolved by lower index).
fn topk_indices(col: ArrayView1<'_, f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Mean of the top-k logits of each action column.
pub fn pooled_logits(logits: &Array2<f64>, num_classes: usize, topk_ratio: f64) -> Vec<f64> {
    let k = topk_count(logits.nrows(), topk_ratio);
    (0..num_classes)
        .map(|c| {
            let col = logits.column(c);
            topk_indices(col, k).iter().map(|&i| col[i]).sum::<f64>() / k as f64
        })
        .collect()
}

/// Video-level class scores used for gating proposals.
pub fn video_scores(logits: &Array2<f64>, num_classes: usize, topk_ratio: f64) -> Vec<f64> {
    pooled_logits(logits, num_classes, topk_ratio)
        .into_iter()
        .map(sigmoid)
        .collect()
}

/// Top-k pooled binary cross-entropy summed over action classes, with its
/// gradient with respect to the logits. The background column gets no
/// gradient.
pub fn mil_loss(logits: &Array2<f64>, video_labels: &[u8], topk_ratio: f64) -> Result<(f64, Array2<f64>)> {
    let (l, k1) = logits.dim();
    let num_classes = video_labels.len();
    if l == 0 || k1 < num_classes {
        return Err(Error::ShapeMismatch {
            expected: format!("l >= 1 and at least {num_classes} logit columns"),
            got: format!("{l}x{k1}"),
        });
    }
    let k = topk_count(l, topk_ratio);
    let mut grad = Array2::zeros((l, k1));
    let mut loss = 0.0;
    for (c, &y) in video_labels.iter().enumerate() {
        let col = logits.column(c);
        let idx = topk_indices(col, k);
        let pooled = idx.iter().map(|&i| col[i]).sum::<f64>() / k as f64;
        let y = f64::from(y);
        loss += softplus(pooled) - y * pooled;
        let d = (sigmoid(pooled) - y) / k as f64;
        for i in idx {
            grad[[i, c]] = d;
        }
    }
    Ok((loss, grad))
}
