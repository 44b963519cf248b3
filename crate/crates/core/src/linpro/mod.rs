//! Pseudo labels from action boundaries via ℓ1 minimization.
//!
//! For one class with `n` fused instances, each instance contributes a
//! weighting column over the `l` snippets (positive on its inner snippets,
//! negative on the flanking outer windows). The label `g` is the minimum
//! ℓ1-norm non-negative vector whose weighted sums reproduce every instance's
//! confidence. Overlapping instances can make the equalities inconsistent,
//! so each row carries a pair of heavily penalized slacks. Snippets whose
//! inner/outer memberships are identical are interchangeable in the LP and
//! get averaged afterwards, which flattens the solution without changing any
//! constraint value or the ℓ1-norm.

pub mod simplex;

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proposals::{outer_len, outer_windows};
use crate::types::{inner_snippets_clipped, ActionInstance};

use simplex::{LpStatus, SimplexOptions, StandardForm};

/// Penalty on constraint slack in the objective.
pub const SLACK_PENALTY: f64 = 1e4;
/// Slack magnitude above which a solution counts as relaxed.
pub const SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `1/|inner|` on inner snippets and `-1/|outer|` on outer snippets.
    #[default]
    Normalized,
    /// `+1` inner, `-1` outer.
    Literal,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "literal" => Ok(Self::Literal),
            other => Err(Error::config(
                "w_mode",
                format!("unknown mode `{other}` (expected normalized or literal)"),
            )),
        }
    }
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Normalized => "normalized",
            Self::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Membership {
    Background,
    Inner,
    Outer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    /// `l x n`, one column per instance.
    pub w: Array2<f64>,
    pub q: Vec<f64>,
    /// `memberships[i][j]`: role of snippet `i` for instance `j`.
    pub memberships: Vec<Vec<Membership>>,
    pub alpha: f64,
    pub mode: WeightMode,
}

impl ConstraintSystem {
    pub fn num_snippets(&self) -> usize {
        self.w.nrows()
    }

    pub fn num_instances(&self) -> usize {
        self.w.ncols()
    }

    /// `W^T g`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.w
            .axis_iter(Axis(1))
            .map(|col| col.iter().zip(g).map(|(w, g)| w * g).sum())
            .collect()
    }

    /// `max_j |(W^T g)_j - q_j|`.
    pub fn residual(&self, g: &[f64]) -> f64 {
        self.apply(g)
            .iter()
            .zip(&self.q)
            .map(|(a, q)| (a - q).abs())
            .fold(0.0, f64::max)
    }
}

pub fn build_constraints(
    instances: &[ActionInstance],
    len: usize,
    alpha: f64,
    mode: WeightMode,
) -> Result<ConstraintSystem> {
    if let Some(a) = instances.first() {
        if let Some(b) = instances.iter().find(|b| b.class_id != a.class_id) {
            return Err(Error::MixedClasses(a.class_id, b.class_id));
        }
    }
    let n = instances.len();
    let mut w = Array2::zeros((len, n));
    let mut memberships = vec![vec![Membership::Background; n]; len];
    let mut q = Vec::with_capacity(n);
    for (j, inst) in instances.iter().enumerate() {
        if !(inst.confidence > 0.0 && inst.confidence.is_finite()) {
            return Err(Error::NonPositiveConfidence(inst.confidence));
        }
        let inner = inner_snippets_clipped(&inst.interval, len);
        if inner.is_empty() {
            return Err(Error::EmptyInner {
                start: inst.start(),
                end: inst.end(),
                len,
            });
        }
        let (left, right) = outer_windows(&inner, outer_len(&inst.interval, alpha), len);
        let outer: Vec<usize> = left.chain(right).collect();
        let (wi, wo) = match mode {
            WeightMode::Literal => (1.0, -1.0),
            WeightMode::Normalized => (
                1.0 / inner.clone().count() as f64,
                if outer.is_empty() {
                    0.0
                } else {
                    -1.0 / outer.len() as f64
                },
            ),
        };
        for i in inner {
            w[[i, j]] = wi;
            memberships[i][j] = Membership::Inner;
        }
        for i in outer {
            w[[i, j]] = wo;
            memberships[i][j] = Membership::Outer;
        }
        q.push(inst.confidence);
    }
    Ok(ConstraintSystem {
        w,
        q,
        memberships,
        alpha,
        mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Relaxed,
    DegenerateEmpty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub g: Vec<f64>,
    pub objective: f64,
    /// `u_j + v_j` per constraint row.
    pub slack_used: Vec<f64>,
    pub status: SolveStatus,
}

/// `min Σg + λ Σ(u + v)  s.t.  W^T g + u - v = q,  g, u, v >= 0`.
pub fn solve_l1_lp(cs: &ConstraintSystem) -> Result<LpSolution> {
    let (l, n) = cs.w.dim();
    if n == 0 {
        return Ok(LpSolution {
            g: vec![0.0; l],
            objective: 0.0,
            slack_used: Vec::new(),
            status: SolveStatus::DegenerateEmpty,
        });
    }
    let cols = l + 2 * n;
    let mut a = Array2::zeros((n, cols));
    a.slice_mut(ndarray::s![.., ..l]).assign(&cs.w.t());
    for j in 0..n {
        a[[j, l + j]] = 1.0;
        a[[j, l + n + j]] = -1.0;
    }
    let mut c = vec![1.0; l];
    c.extend(std::iter::repeat_n(SLACK_PENALTY, 2 * n));
    let lp = StandardForm {
        a,
        b: cs.q.clone(),
        c,
    };
    let res = simplex::solve(&lp, &SimplexOptions::default());
    if res.status != LpStatus::Optimal {
        // Zero g with u = q is always feasible, so this is a solver failure.
        return Err(Error::Lp(format!("simplex ended with {:?}", res.status)));
    }
    let g = res.x[..l].to_vec();
    let slack_used: Vec<f64> = (0..n).map(|j| res.x[l + j] + res.x[l + n + j]).collect();
    let objective = g.iter().sum::<f64>() + SLACK_PENALTY * slack_used.iter().sum::<f64>();
    let status = if slack_used.iter().any(|s| *s > SLACK_TOL) {
        SolveStatus::Relaxed
    } else {
        SolveStatus::Optimal
    };
    Ok(LpSolution {
        g,
        objective,
        slack_used,
        status,
    })
}

/// Replaces each snippet's value by the mean over snippets sharing its
/// membership signature.
pub fn equivalence_average(sol: &LpSolution, cs: &ConstraintSystem) -> Vec<f64> {
    let mut groups: BTreeMap<&[Membership], Vec<usize>> = BTreeMap::new();
    for (i, sig) in cs.memberships.iter().enumerate() {
        groups.entry(sig.as_slice()).or_default().push(i);
    }
    let mut out = sol.g.clone();
    for idx in groups.values() {
        let mean = idx.iter().map(|&i| sol.g[i]).sum::<f64>() / idx.len() as f64;
        for &i in idx {
            out[i] = mean;
        }
    }
    out
}

/// Per-video pseudo label, `l x K`, non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    pub g: Array2<f64>,
}

impl PseudoLabel {
    pub fn zeros(len: usize, num_classes: usize) -> Self {
        Self {
            g: Array2::zeros((len, num_classes)),
        }
    }

    pub fn new(g: Array2<f64>) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("pseudo label (entries must be finite and >= 0)"));
        }
        Ok(Self { g })
    }
}

/// Constraint build, LP solve and averaging for one class.
pub fn class_pseudo_label(
    instances: &[ActionInstance],
    len: usize,
    alpha: f64,
    mode: WeightMode,
) -> Result<Vec<f64>> {
    let cs = build_constraints(instances, len, alpha, mode)?;
    let sol = solve_l1_lp(&cs)?;
    Ok(equivalence_average(&sol, &cs))
}

/// Builds `G` column by column. Instances that cannot form a constraint are
/// dropped with a warning; a class whose solve fails gets a zero column.
pub fn generate_pseudo_label(
    fused: &[ActionInstance],
    len: usize,
    num_classes: usize,
    alpha: f64,
    mode: WeightMode,
) -> PseudoLabel {
    let mut label = PseudoLabel::zeros(len, num_classes);
    let mut per_class: BTreeMap<usize, Vec<ActionInstance>> = BTreeMap::new();
    for a in fused {
        if a.class_id >= num_classes {
            log::warn!("dropping instance of class {} (K = {num_classes})", a.class_id);
            continue;
        }
        if a.confidence.is_nan() || a.confidence <= 0.0 {
            log::warn!("dropping instance with confidence {}", a.confidence);
            continue;
        }
        if inner_snippets_clipped(&a.interval, len).is_empty() {
            log::warn!(
                "dropping instance [{}, {}] with no inner snippets",
                a.start(),
                a.end()
            );
            continue;
        }
        per_class.entry(a.class_id).or_default().push(*a);
    }
    for (c, insts) in per_class {
        match class_pseudo_label(&insts, len, alpha, mode) {
            Ok(col) => {
                for (i, v) in col.into_iter().enumerate() {
                    label.g[[i, c]] = v.max(0.0);
                }
            }
            Err(e) => log::warn!("class {c}: {e}; using a zero pseudo label"),
        }
    }
    label
}
