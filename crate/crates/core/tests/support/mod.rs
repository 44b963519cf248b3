//! Independent reference implementations and random case generators shared
//! by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use wstal_core::linpro::{ConstraintSystem, WeightMode, SLACK_PENALTY};
use wstal_core::ActionInstance;

/// Solves `a x = b` for square `a` with partial pivoting. `None` if singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Optimal value of `min Σg + λ Σ(u + v)  s.t.  W^T g + u - v = q, all >= 0`
/// by enumerating every basic feasible solution.
pub fn brute_force_lp(cs: &ConstraintSystem) -> f64 {
    let (l, n) = cs.w.dim();
    if n == 0 {
        return 0.0;
    }
    let cols = l + 2 * n;
    let column = |j: usize| -> Vec<f64> {
        (0..n)
            .map(|r| {
                if j < l {
                    cs.w[[j, r]]
                } else if j < l + n {
                    f64::from(u8::from(j - l == r))
                } else {
                    -f64::from(u8::from(j - l - n == r))
                }
            })
            .collect()
    };
    let cost = |j: usize| if j < l { 1.0 } else { SLACK_PENALTY };
    let all: Vec<Vec<f64>> = (0..cols).map(column).collect();

    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = (0..n).map(|r| idx.iter().map(|&j| all[j][r]).collect()).collect();
        if let Some(x) = gauss_solve(a, cs.q.clone()) {
            if x.iter().all(|v| *v >= -1e-9) {
                let obj: f64 = idx.iter().zip(&x).map(|(&j, v)| cost(j) * v.max(0.0)).sum();
                best = best.min(obj);
            }
        }
        if !next_combination(&mut idx, cols) {
            break;
        }
    }
    best
}

/// Random single-class instances over a video of at most 20 snippets, with at
/// most 4 instances. Endpoints are integers or half-integers.
pub fn random_instances<R: Rng>(rng: &mut R) -> (Vec<ActionInstance>, usize) {
    let l = rng.random_range(1..=20usize);
    let n = rng.random_range(1..=4usize);
    let insts = (0..n)
        .map(|_| {
            let s = rng.random_range(0..l);
            let max_len = (l - 1 - s).min(l / 2);
            let e = s + rng.random_range(0..=max_len);
            let (mut s, mut e) = (s as f64, e as f64);
            if s >= 1.0 && rng.random_bool(0.25) {
                s -= 0.5;
            }
            if rng.random_bool(0.25) {
                e += 0.5;
            }
            ActionInstance::new(0, rng.random_range(0.01..=1.0), s, e).unwrap()
        })
        .collect();
    (insts, l)
}

pub fn random_mode<R: Rng>(rng: &mut R) -> WeightMode {
    if rng.random_bool(0.5) {
        WeightMode::Normalized
    } else {
        WeightMode::Literal
    }
}

/// Reference IoU on `[start, end]` intervals; coincident points overlap fully.
pub fn iou(a: &ActionInstance, b: &ActionInstance) -> f64 {
    let inter = (a.end().min(b.end()) - a.start().max(b.start())).max(0.0);
    let union = (a.end() - a.start()) + (b.end() - b.start()) - inter;
    if union > 0.0 {
        inter / union
    } else if a.start() == b.start() {
        1.0
    } else {
        0.0
    }
}

/// Greedy grouping: strongest remaining instance (ties: earlier start, lower
/// class, input order) takes every remaining same-class instance with IoU
/// above `h`.
pub fn reference_groups(pool: &[ActionInstance], h: f64) -> Vec<Vec<ActionInstance>> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&pool[i], &pool[j]);
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.start().total_cmp(&b.start()))
            .then(a.class_id.cmp(&b.class_id))
            .then(i.cmp(&j))
    });
    let mut taken = vec![false; pool.len()];
    let mut groups = Vec::new();
    for &s in &order {
        if taken[s] {
            continue;
        }
        let seed = pool[s];
        let mut group = Vec::new();
        for &j in &order {
            if !taken[j] && pool[j].class_id == seed.class_id && (j == s || iou(&seed, &pool[j]) > h) {
                taken[j] = true;
                group.push(pool[j]);
            }
        }
        groups.push(group);
    }
    groups
}

/// Pools of clustered instances over two classes. All confidences differ by
/// at least 1e-3, so every group has a unique strongest member.
pub fn random_pool<R: Rng>(rng: &mut R) -> Vec<ActionInstance> {
    let clusters = rng.random_range(1..=4);
    let mut grid: Vec<usize> = (10..1000).collect();
    grid.shuffle(rng);
    let mut next_conf = grid.into_iter();
    let mut pool = Vec::new();
    for _ in 0..clusters {
        let class = rng.random_range(0..2);
        let s0 = rng.random_range(0.0..30.0);
        let len0 = rng.random_range(3.0..10.0);
        for _ in 0..rng.random_range(1..=5) {
            let s = (s0 + rng.random_range(-1.0..1.0f64)).max(0.0);
            let e = s + (len0 + rng.random_range(-1.0..1.0));
            let q = next_conf.next().unwrap() as f64 / 1000.0;
            pool.push(ActionInstance::new(class, q, s, e).unwrap());
        }
    }
    pool
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)` in the Frobenius norm (0 when both vanish).
pub fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|x| x * x).sum().sqrt();
    let scale = a.mapv(|x| x * x).sum().sqrt().max(b.mapv(|x| x * x).sum().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x` with step `h`.
pub fn numeric_gradient(x: &Array2<f64>, h: f64, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for (idx, g) in grad.indexed_iter_mut() {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe);
        probe[idx] = orig - h;
        let down = f(&probe);
        probe[idx] = orig;
        *g = (up - down) / (2.0 * h);
    }
    grad
}

/// Finds, for each expected instance, a distinct actual instance of the same
/// class minimizing the largest field difference, and returns the worst such
/// difference (infinite if counts or classes cannot be paired).
pub fn max_paired_deviation(expected: &[ActionInstance], actual: &[ActionInstance]) -> f64 {
    if expected.len() != actual.len() {
        return f64::INFINITY;
    }
    let dev = |a: &ActionInstance, b: &ActionInstance| {
        (a.confidence - b.confidence)
            .abs()
            .max((a.start() - b.start()).abs())
            .max((a.end() - b.end()).abs())
    };
    let mut used = vec![false; actual.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let best = (0..actual.len())
            .filter(|&j| !used[j] && actual[j].class_id == e.class_id)
            .min_by(|&i, &j| dev(e, &actual[i]).total_cmp(&dev(e, &actual[j])));
        match best {
            Some(j) => {
                used[j] = true;
                worst = worst.max(dev(e, &actual[j]));
            }
            None => return f64::INFINITY,
        }
    }
    worst
}
