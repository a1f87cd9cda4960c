//! Dense revised simplex for `min c'x  s.t.  Ax = b, x >= 0`.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations after each pivot, with a fresh Gauss-Jordan inversion every
//! `refactor_interval` pivots. Pricing is Dantzig's rule; after a run of
//! degenerate pivots the solver switches to Bland's rule until the objective
//! moves again.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense LP in standard form.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl DenseLp {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.len() != rows * cols || b.len() != rows || c.len() != cols {
            return Err(Error::param("LP data does not match its declared shape"));
        }
        Ok(Self { rows, cols, a, b, c })
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    /// `max_i |(Ax - b)_i|`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| {
                let ax: f64 = (0..self.cols).map(|j| self.entry(i, j) * x[j]).sum();
                (ax - self.b[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Optimality and feasibility tolerance.
    pub tolerance: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tolerance: f64,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            tolerance: 1e-9,
            pivot_tolerance: 1e-9,
            refactor_interval: 64,
            bland_after: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    /// The iteration limit was reached; the solution is feasible but may be
    /// suboptimal.
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
    pub status: SimplexStatus,
    pub iterations: usize,
    /// Row duals `y = c_B B^{-1}`.
    pub duals: Vec<f64>,
    /// Smallest reduced cost over eligible columns (>= -tol at optimality).
    pub min_reduced_cost: f64,
}

/// Solves the LP. With `start` the given columns must form a feasible basis;
/// without it a phase-one problem over artificial columns is solved first.
pub fn solve(lp: &DenseLp, start: Option<&[usize]>, opts: &SimplexOptions) -> Result<SimplexSolution> {
    match start {
        Some(basis) => {
            let blocked = vec![false; lp.cols];
            let mut state = State::new(&lp.a, lp.cols, &lp.b, basis.to_vec())?;
            if state.xb.iter().any(|&v| v < -opts.tolerance * (1.0 + v.abs())) {
                return Err(Error::param("starting basis is not primal feasible"));
            }
            let status = state.run(&lp.c, &blocked, opts)?;
            Ok(state.finish(&lp.c, &blocked, lp.cols, status))
        }
        None => two_phase(lp, opts),
    }
}

fn two_phase(lp: &DenseLp, opts: &SimplexOptions) -> Result<SimplexSolution> {
    let (m, n) = (lp.rows, lp.cols);
    let total = n + m;
    let mut a = vec![0.0; m * total];
    let mut b = lp.b.clone();
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        b[i] *= sign;
        for j in 0..n {
            a[i * total + j] = sign * lp.entry(i, j);
        }
        a[i * total + n + i] = 1.0;
    }
    let mut c1 = vec![0.0; total];
    c1[n..].iter_mut().for_each(|v| *v = 1.0);
    let blocked = vec![false; total];
    let mut state = State::new(&a, total, &b, (n..total).collect())?;
    let status = state.run(&c1, &blocked, opts)?;
    let infeasibility: f64 = state
        .basis
        .iter()
        .zip(&state.xb)
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v)
        .sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-7 * scale {
        return Err(if status == SimplexStatus::IterationLimit {
            Error::param("phase one did not converge")
        } else {
            Error::LpInfeasible
        });
    }
    // pivot artificials out of the basis where a structural column allows it
    for pos in 0..m {
        if state.basis[pos] < n {
            continue;
        }
        let row: Vec<f64> = state.binv[pos * m..(pos + 1) * m].to_vec();
        let candidate = (0..n).filter(|j| !state.basis.contains(j)).find(|&j| {
            let alpha: f64 = (0..m).map(|k| row[k] * a[k * total + j]).sum();
            alpha.abs() > 1e-7
        });
        if let Some(j) = candidate {
            let alpha = state.column(j);
            state.pivot(pos, j, &alpha);
        }
    }
    let mut c2 = vec![0.0; total];
    c2[..n].copy_from_slice(&lp.c);
    let mut blocked2 = vec![false; total];
    blocked2[n..].iter_mut().for_each(|v| *v = true);
    let status = state.run(&c2, &blocked2, opts)?;
    // a redundant row keeps its artificial basic at zero
    let mut sol = state.finish(&c2, &blocked2, total, status);
    sol.x.truncate(n);
    Ok(sol)
}

struct State<'a> {
    a: &'a [f64],
    cols: usize,
    b: &'a [f64],
    m: usize,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> State<'a> {
    fn new(
        a: &'a [f64],
        cols: usize,
        b: &'a [f64],
        basis: Vec<usize>,
    ) -> Result<Self> {
        let m = b.len();
        if basis.len() != m || basis.iter().any(|&j| j >= cols) {
            return Err(Error::param("starting basis has the wrong size"));
        }
        let mut s = Self {
            a,
            cols,
            b,
            m,
            basis,
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            iterations: 0,
            since_refactor: 0,
        };
        s.refactor()?;
        Ok(s)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    /// Inverts the basis matrix from scratch and recomputes `x_B`.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut aug = vec![0.0; m * 2 * m];
        for i in 0..m {
            for (pos, &j) in self.basis.iter().enumerate() {
                aug[i * 2 * m + pos] = self.entry(i, j);
            }
            aug[i * 2 * m + m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| {
                    aug[x * 2 * m + col]
                        .abs()
                        .total_cmp(&aug[y * 2 * m + col].abs())
                })
                .unwrap();
            let p = aug[piv * 2 * m + col];
            if p.abs() < 1e-12 {
                return Err(Error::param("basis matrix is singular"));
            }
            if piv != col {
                for k in 0..2 * m {
                    aug.swap(piv * 2 * m + k, col * 2 * m + k);
                }
            }
            for k in 0..2 * m {
                aug[col * 2 * m + k] /= p;
            }
            for i in 0..m {
                if i == col {
                    continue;
                }
                let f = aug[i * 2 * m + col];
                if f != 0.0 {
                    for k in 0..2 * m {
                        aug[i * 2 * m + k] -= f * aug[col * 2 * m + k];
                    }
                }
            }
        }
        for i in 0..m {
            self.binv[i * m..(i + 1) * m].copy_from_slice(&aug[i * 2 * m + m..(i + 1) * 2 * m]);
        }
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// `B^{-1} A_j`.
    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|i| (0..m).map(|k| self.binv[i * m + k] * self.entry(k, j)).sum())
            .collect()
    }

    fn duals(&self, c: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (pos, &j) in self.basis.iter().enumerate() {
            let cj = c[j];
            if cj != 0.0 {
                for k in 0..m {
                    y[k] += cj * self.binv[pos * m + k];
                }
            }
        }
        y
    }

    fn reduced_costs(&self, c: &[f64], y: &[f64]) -> Vec<f64> {
        let mut d = c.to_vec();
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                let row = &self.a[i * self.cols..(i + 1) * self.cols];
                for (dj, &aij) in d.iter_mut().zip(row) {
                    *dj -= yi * aij;
                }
            }
        }
        for &j in &self.basis {
            d[j] = 0.0;
        }
        d
    }

    fn pivot(&mut self, leave: usize, enter: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[leave];
        for k in 0..m {
            self.binv[leave * m + k] /= p;
        }
        self.xb[leave] /= p;
        for i in 0..m {
            if i == leave || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[leave * m + k];
            }
            self.xb[i] -= f * self.xb[leave];
        }
        self.basis[leave] = enter;
        self.since_refactor += 1;
    }

    fn run(&mut self, c: &[f64], blocked: &[bool], opts: &SimplexOptions) -> Result<SimplexStatus> {
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return Ok(SimplexStatus::IterationLimit);
            }
            if self.since_refactor >= opts.refactor_interval {
                self.refactor()?;
            }
            for v in &mut self.xb {
                if *v < 0.0 && *v > -opts.tolerance {
                    *v = 0.0;
                }
            }
            let y = self.duals(c);
            let d = self.reduced_costs(c, &y);
            let bland = degenerate_streak >= opts.bland_after;
            let eligible = (0..self.cols).filter(|&j| !blocked[j] && d[j] < -opts.tolerance);
            let enter = if bland {
                eligible.min()
            } else {
                eligible.min_by(|&x, &y| d[x].total_cmp(&d[y]))
            };
            let Some(enter) = enter else {
                return Ok(SimplexStatus::Optimal);
            };
            let alpha = self.column(enter);
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..self.m {
                if alpha[i] <= opts.pivot_tolerance {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / alpha[i];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best - 1e-12 {
                            true
                        } else if ratio <= best + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                alpha[i] > alpha[l]
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = best.min(ratio);
                    leave = Some(i);
                }
            }
            let Some(leave) = leave else {
                return Err(Error::LpUnbounded);
            };
            if best <= opts.tolerance {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(leave, enter, &alpha);
            self.iterations += 1;
        }
    }

    fn finish(mut self, c: &[f64], blocked: &[bool], cols: usize, status: SimplexStatus) -> SimplexSolution {
        // fresh factorization for the reported point and certificate; on
        // failure the updated inverse is kept as is
        let _ = self.refactor();
        let mut x = vec![0.0; cols];
        for (pos, &j) in self.basis.iter().enumerate() {
            x[j] = self.xb[pos].max(0.0);
        }
        let y = self.duals(c);
        let d = self.reduced_costs(c, &y);
        let min_reduced_cost = (0..cols)
            .filter(|&j| !blocked[j])
            .map(|j| d[j])
            .fold(f64::INFINITY, f64::min);
        let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        SimplexSolution {
            x,
            objective,
            basis: self.basis,
            status,
            iterations: self.iterations,
            duals: y,
            min_reduced_cost,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let lp = DenseLp::new(
            3,
            5,
            vec![
                1.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 1.0, 0.0, //
                3.0, 2.0, 0.0, 0.0, 1.0,
            ],
            vec![4.0, 12.0, 18.0],
            vec![-3.0, -5.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let opts = SimplexOptions::default();
        for start in [None, Some(&[2usize, 3, 4][..])] {
            let sol = solve(&lp, start, &opts).unwrap();
            assert_eq!(sol.status, SimplexStatus::Optimal);
            assert!((sol.objective + 36.0).abs() < 1e-9);
            assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
            assert!(sol.min_reduced_cost >= -1e-9);
            assert!(lp.primal_residual(&sol.x) < 1e-9);
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        // x1 + x2 = -1 with x >= 0
        let inf = DenseLp::new(1, 2, vec![1.0, 1.0], vec![-1.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            solve(&inf, None, &SimplexOptions::default()),
            Err(Error::LpInfeasible)
        ));
        // min -x1 s.t. x1 - x2 = 0
        let unb = DenseLp::new(1, 2, vec![1.0, -1.0], vec![0.0], vec![-1.0, 0.0]).unwrap();
        assert!(matches!(
            solve(&unb, None, &SimplexOptions::default()),
            Err(Error::LpUnbounded)
        ));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // x1 + x2 = 1 written twice
        let lp = DenseLp::new(
            2,
            2,
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        let sol = solve(&lp, None, &SimplexOptions::default()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_limit_reports_feasible_point() {
        let lp = DenseLp::new(
            3,
            5,
            vec![
                1.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 1.0, 0.0, //
                3.0, 2.0, 0.0, 0.0, 1.0,
            ],
            vec![4.0, 12.0, 18.0],
            vec![-3.0, -5.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let opts = SimplexOptions {
            max_iterations: 1,
            ..SimplexOptions::default()
        };
        let sol = solve(&lp, Some(&[2, 3, 4]), &opts).unwrap();
        assert_eq!(sol.status, SimplexStatus::IterationLimit);
        assert!(lp.primal_residual(&sol.x) < 1e-9);
        assert!(sol.x.iter().all(|&v| v >= 0.0));
    }
}
