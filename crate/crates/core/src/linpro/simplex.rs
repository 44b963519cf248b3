//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min c^T x  s.t.  A x = b, x >= 0`. Sizes in this crate are small
//! (a few dozen rows, a few thousand columns at most), so the full tableau is
//! kept in memory and every pivot updates all of it.

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct StandardForm {
    /// `m x n` equality matrix.
    pub a: Array2<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            feasibility_tol: 1e-9,
            max_pivots: 100_000,
        }
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // Row 0 holds reduced costs (last entry: minus the objective value);
    // rows 1..=m hold the constraints with the rhs in the last column.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let cols = self.cols;
        let p = self.at(row, col);
        for c in 0..cols {
            self.data[row * cols + c] /= p;
        }
        let (before, rest) = self.data.split_at_mut(row * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for chunk in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = chunk[col];
            if f != 0.0 {
                for (x, pr) in chunk.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pr;
                }
                chunk[col] = 0.0;
            }
        }
        self.basis[row - 1] = col;
    }

    /// Runs Bland's rule over columns `0..active_cols`.
    fn optimize(&mut self, active_cols: usize, opts: &SimplexOptions, pivots: &mut usize) -> LpStatus {
        loop {
            if *pivots >= opts.max_pivots {
                return LpStatus::IterationLimit;
            }
            let Some(enter) = (0..active_cols).find(|&j| self.at(0, j) < -opts.pivot_tol) else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 1..self.rows {
                let a = self.at(r, enter);
                if a > opts.pivot_tol {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r - 1] < self.basis[lr - 1])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return LpStatus::Unbounded;
            };
            self.pivot(row, enter);
            *pivots += 1;
        }
    }
}

/// Solves a standard-form LP. Artificial variables start as the basis in
/// phase one; any left in the basis afterwards are pivoted out or their
/// (redundant) rows dropped before phase two.
pub fn solve(lp: &StandardForm, opts: &SimplexOptions) -> SimplexResult {
    let (m, n) = lp.a.dim();
    assert_eq!(lp.b.len(), m, "rhs length");
    assert_eq!(lp.c.len(), n, "cost length");

    let cols = n + m + 1;
    let mut data = vec![0.0; (m + 1) * cols];
    for r in 0..m {
        let sign = if lp.b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            data[(r + 1) * cols + j] = sign * lp.a[[r, j]];
        }
        data[(r + 1) * cols + n + r] = 1.0;
        data[(r + 1) * cols + cols - 1] = sign * lp.b[r];
    }
    // Phase one costs: sum of artificials, expressed in reduced form.
    for r in 0..m {
        for c in 0..cols {
            if !(n..n + m).contains(&c) {
                data[c] -= data[(r + 1) * cols + c];
            }
        }
    }
    let mut t = Tableau {
        rows: m + 1,
        cols,
        data,
        basis: (n..n + m).collect(),
    };

    let mut pivots = 0;
    let status = t.optimize(n + m, opts, &mut pivots);
    if status == LpStatus::IterationLimit {
        return failed(status, n, pivots);
    }
    if -t.rhs(0) > opts.feasibility_tol * (1.0 + lp.b.iter().map(|x| x.abs()).sum::<f64>()) {
        return failed(LpStatus::Infeasible, n, pivots);
    }

    // Drive artificials out of the basis; drop rows that are redundant.
    let mut r = 1;
    while r < t.rows {
        if t.basis[r - 1] >= n {
            if let Some(j) = (0..n).find(|&j| t.at(r, j).abs() > opts.pivot_tol) {
                t.pivot(r, j);
                pivots += 1;
            } else {
                let cols = t.cols;
                t.data.drain(r * cols..(r + 1) * cols);
                t.basis.remove(r - 1);
                t.rows -= 1;
                continue;
            }
        }
        r += 1;
    }

    // Phase two reduced costs.
    let cols = t.cols;
    for c in 0..cols {
        t.data[c] = if c < n { lp.c[c] } else { 0.0 };
    }
    for r in 1..t.rows {
        let cb = lp.c[t.basis[r - 1]];
        if cb != 0.0 {
            for c in 0..cols {
                t.data[c] -= cb * t.data[r * cols + c];
            }
        }
    }
    let status = t.optimize(n, opts, &mut pivots);
    if status != LpStatus::Optimal {
        return failed(status, n, pivots);
    }

    let mut x = vec![0.0; n];
    for r in 1..t.rows {
        x[t.basis[r - 1]] = t.rhs(r).max(0.0);
    }
    refine(lp, &t.basis, &mut x);
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    SimplexResult {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots,
    }
}

fn failed(status: LpStatus, n: usize, pivots: usize) -> SimplexResult {
    SimplexResult {
        status,
        x: vec![0.0; n],
        objective: f64::NAN,
        pivots,
    }
}

/// Recomputes the basic values from the original data by solving `B x_B = b`
/// with partial pivoting, which removes drift accumulated over many pivots.
/// The tableau values are kept if the system is singular or the refined
/// point is worse.
fn refine(lp: &StandardForm, basis: &[usize], x: &mut [f64]) {
    let m = lp.a.nrows();
    let k = basis.len();
    if k == 0 {
        return;
    }
    // Least-squares normal equations would be needed when rows were dropped;
    // fall back to the tableau values in that case.
    if k != m {
        return;
    }
    let mut aug = vec![vec![0.0; k + 1]; m];
    for (r, row) in aug.iter_mut().enumerate() {
        for (i, &j) in basis.iter().enumerate() {
            row[i] = lp.a[[r, j]];
        }
        row[k] = lp.b[r];
    }
    for col in 0..k {
        let piv = (col..m)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        if aug[piv][col].abs() < 1e-12 {
            return;
        }
        aug.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = aug[r][col] / aug[col][col];
                if f != 0.0 {
                    let pivot_row = aug[col].clone();
                    for (x, p) in aug[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    let refined: Vec<f64> = (0..k).map(|i| aug[i][k] / aug[i][i]).collect();
    if refined.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return;
    }
    let residual = |x: &[f64]| -> f64 {
        (0..m)
            .map(|r| {
                let ax: f64 = (0..lp.a.ncols()).map(|j| lp.a[[r, j]] * x[j]).sum();
                (ax - lp.b[r]).abs()
            })
            .fold(0.0, f64::max)
    };
    let before = residual(x);
    let mut candidate = x.to_vec();
    for (i, &j) in basis.iter().enumerate() {
        candidate[j] = refined[i].max(0.0);
    }
    if residual(&candidate) <= before {
        x.copy_from_slice(&candidate);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn lp(a: Array2<f64>, b: Vec<f64>, c: Vec<f64>) -> StandardForm {
        StandardForm { a, b, c }
    }

    #[test]
    fn simple_optimum() {
        // min -x1 - x2  s.t. x1 + 2 x2 + s1 = 4, 3 x1 + x2 + s2 = 6
        let p = lp(
            array![[1.0, 2.0, 1.0, 0.0], [3.0, 1.0, 0.0, 1.0]],
            vec![4.0, 6.0],
            vec![-1.0, -1.0, 0.0, 0.0],
        );
        let r = solve(&p, &SimplexOptions::default());
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 2.8).abs() < 1e-12);
        assert!((r.x[0] - 1.6).abs() < 1e-12 && (r.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible() {
        // x1 + x2 = -1 with x >= 0
        let p = lp(array![[1.0, 1.0]], vec![-1.0], vec![1.0, 1.0]);
        assert_eq!(solve(&p, &SimplexOptions::default()).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        // min -x1 s.t. x1 - x2 = 1
        let p = lp(array![[1.0, -1.0]], vec![1.0], vec![-1.0, 0.0]);
        assert_eq!(solve(&p, &SimplexOptions::default()).status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows() {
        let p = lp(
            array![[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]],
            vec![2.0, 4.0, 3.0],
            vec![1.0, 2.0, 1.0],
        );
        let r = solve(&p, &SimplexOptions::default());
        assert_eq!(r.status, LpStatus::Optimal);
        // x1 = 2, x2 = 0, x3 = 3
        assert!((r.objective - 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let p = lp(
            array![
                [0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                [0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
            ],
            vec![0.0, 0.0, 1.0],
            vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0],
        );
        let r = solve(&p, &SimplexOptions::default());
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_problem() {
        let p = lp(Array2::zeros((0, 3)), vec![], vec![1.0, 1.0, 1.0]);
        let r = solve(&p, &SimplexOptions::default());
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.x, vec![0.0; 3]);
    }
}
