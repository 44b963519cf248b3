//! Δ pseudo labels: the signed change between consecutive label generations,
//! and the soft-target cross-entropy that trains on them.
//!
//! Logits carry `K + 1` columns (K actions plus background). Targets only
//! cover the action columns; the background column takes part in the softmax
//! but is never supervised directly.

use ndarray::{Array2, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::linpro::PseudoLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLabel {
    pub dg: Array2<f64>,
}

/// Last generated label and how many generations have been produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelHistory {
    pub previous: Option<PseudoLabel>,
    pub generation_index: usize,
}

impl LabelHistory {
    /// Computes `G^t - G^{t-1}` and stores `current` as the new predecessor.
    pub fn renew(&mut self, current: PseudoLabel) -> Result<DeltaLabel> {
        let delta = delta_labels(&current, self)?;
        self.previous = Some(current);
        self.generation_index += 1;
        Ok(delta)
    }
}

/// `G^t - G^{t-1}`, with a zero predecessor for the first generation.
pub fn delta_labels(current: &PseudoLabel, history: &LabelHistory) -> Result<DeltaLabel> {
    match &history.previous {
        None => Ok(DeltaLabel {
            dg: current.g.clone(),
        }),
        Some(prev) if prev.g.dim() != current.g.dim() => Err(Error::ShapeMismatch {
            expected: format!("{:?}", prev.g.dim()),
            got: format!("{:?}", current.g.dim()),
        }),
        Some(prev) => Ok(DeltaLabel {
            dg: &current.g - &prev.g,
        }),
    }
}

fn check_shapes(logits: &Array2<f64>, dg: &Array2<f64>) -> Result<()> {
    let (l, k1) = logits.dim();
    if dg.nrows() != l || dg.ncols() + 1 != k1 {
        return Err(Error::ShapeMismatch {
            expected: format!("targets {}x{}", l, k1.saturating_sub(1)),
            got: format!("{}x{}", dg.nrows(), dg.ncols()),
        });
    }
    Ok(())
}

fn log_softmax(row: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|z| z - lse).collect()
}

/// `weight * Σ_j Σ_{c<K} -ΔG[j,c] · log softmax(z_j)[c]`.
pub fn delta_ce_loss(logits: &Array2<f64>, dg: &Array2<f64>, weight: f64) -> Result<f64> {
    check_shapes(logits, dg)?;
    let mut total = 0.0;
    for (z, t) in logits.rows().into_iter().zip(dg.rows()) {
        if t.iter().all(|v| *v == 0.0) {
            continue;
        }
        let lp = log_softmax(z);
        total -= t.iter().zip(&lp).map(|(t, lp)| t * lp).sum::<f64>();
    }
    Ok(weight * total)
}

/// Gradient of [`delta_ce_loss`] with respect to the logits:
/// `weight * (P[j,k] · Σ_c ΔG[j,c] - [k<K] ΔG[j,k])`.
pub fn delta_ce_grad(logits: &Array2<f64>, dg: &Array2<f64>, weight: f64) -> Result<Array2<f64>> {
    check_shapes(logits, dg)?;
    let k = dg.ncols();
    let mut grad = Array2::zeros(logits.dim());
    Zip::from(grad.rows_mut())
        .and(logits.rows())
        .and(dg.rows())
        .for_each(|mut out, z, t| {
            let total: f64 = t.sum();
            if total == 0.0 && t.iter().all(|v| *v == 0.0) {
                return;
            }
            let lp = log_softmax(z);
            for (c, o) in out.iter_mut().enumerate() {
                let target = if c < k { t[c] } else { 0.0 };
                *o = weight * (lp[c].exp() * total - target);
            }
        });
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn pl(g: Array2<f64>) -> PseudoLabel {
        PseudoLabel { g }
    }

    #[test]
    fn delta_examples() {
        let x = array![[0.2, 0.5], [0.0, 0.1]];
        let hist = LabelHistory {
            previous: Some(pl(x.clone())),
            generation_index: 1,
        };
        assert_eq!(
            delta_labels(&pl(x.clone()), &hist).unwrap().dg,
            Array2::zeros((2, 2))
        );
        assert_eq!(
            delta_labels(&pl(x.clone()), &LabelHistory::default()).unwrap().dg,
            x
        );

        let hist = LabelHistory {
            previous: Some(pl(array![[0.2, 0.5]])),
            generation_index: 1,
        };
        let d = delta_labels(&pl(array![[0.5, 0.3]]), &hist).unwrap().dg;
        assert!((d[[0, 0]] - 0.3).abs() < 1e-15 && (d[[0, 1]] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn delta_shape_mismatch() {
        let hist = LabelHistory {
            previous: Some(pl(Array2::zeros((3, 2)))),
            generation_index: 1,
        };
        assert!(matches!(
            delta_labels(&pl(Array2::zeros((4, 2))), &hist),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn history_renewal_telescopes() {
        let gens = [
            array![[0.1, 0.0], [0.4, 0.2]],
            array![[0.3, 0.1], [0.0, 0.2]],
            array![[0.0, 0.6], [0.5, 0.5]],
        ];
        let mut hist = LabelHistory::default();
        let mut sum = Array2::<f64>::zeros((2, 2));
        for g in &gens {
            sum += &hist.renew(pl(g.clone())).unwrap().dg;
        }
        assert_eq!(hist.generation_index, 3);
        assert!((&sum - &gens[2]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn loss_examples() {
        let z = array![[0.0, 0.0, 0.0]];
        assert_eq!(delta_ce_loss(&z, &array![[0.0, 0.0]], 1.0).unwrap(), 0.0);
        assert_eq!(
            delta_ce_grad(&z, &array![[0.0, 0.0]], 1.0).unwrap(),
            Array2::zeros((1, 3))
        );
        let up = delta_ce_loss(&z, &array![[1.0, 0.0]], 1.0).unwrap();
        assert!((up - 3f64.ln()).abs() < 1e-12);
        let down = delta_ce_loss(&z, &array![[-1.0, 0.0]], 1.0).unwrap();
        assert!((down + 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_shape_mismatch() {
        assert!(delta_ce_loss(&Array2::zeros((2, 3)), &Array2::zeros((2, 3)), 1.0).is_err());
        assert!(delta_ce_grad(&Array2::zeros((2, 3)), &Array2::zeros((1, 2)), 1.0).is_err());
    }

    #[test]
    fn positive_delta_pushes_target_logit_up() {
        let z = array![[0.3, -1.2, 0.8, 0.1]];
        let g = delta_ce_grad(&z, &array![[0.0, 1.0, 0.0]], 1.0).unwrap();
        // Descent moves against the gradient.
        assert!(-g[[0, 1]] > 0.0);
        assert!(g.iter().enumerate().all(|(i, v)| i == 1 || *v > 0.0));
    }

    #[test]
    fn loss_survives_extreme_logits() {
        let z = array![[1000.0, -1000.0, 0.0]];
        let l = delta_ce_loss(&z, &array![[0.0, 1.0]], 1.0).unwrap();
        assert!(l.is_finite() && l > 1999.0);
    }

    proptest! {
        #[test]
        fn delta_antisymmetric(a in proptest::collection::vec(0.0..1.0f64, 6),
                               b in proptest::collection::vec(0.0..1.0f64, 6)) {
            let a = pl(Array2::from_shape_vec((3, 2), a).unwrap());
            let b = pl(Array2::from_shape_vec((3, 2), b).unwrap());
            let ab = delta_labels(&b, &LabelHistory { previous: Some(a.clone()), generation_index: 1 }).unwrap();
            let ba = delta_labels(&a, &LabelHistory { previous: Some(b), generation_index: 1 }).unwrap();
            prop_assert_eq!(ab.dg, -ba.dg);
        }

        #[test]
        fn loss_is_linear_in_targets(z in proptest::collection::vec(-4.0..4.0f64, 8),
                                     d1 in proptest::collection::vec(-1.0..1.0f64, 6),
                                     d2 in proptest::collection::vec(-1.0..1.0f64, 6),
                                     a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let z = Array2::from_shape_vec((2, 4), z).unwrap();
            let d1 = Array2::from_shape_vec((2, 3), d1).unwrap();
            let d2 = Array2::from_shape_vec((2, 3), d2).unwrap();
            let mix = &d1 * a + &d2 * b;
            let lhs = delta_ce_loss(&z, &mix, 1.0).unwrap();
            let rhs = a * delta_ce_loss(&z, &d1, 1.0).unwrap() + b * delta_ce_loss(&z, &d2, 1.0).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
