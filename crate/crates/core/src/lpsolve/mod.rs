//! L1 fit of a distribution over support points:
//! `min_u ||W u - b||_1  s.t.  u >= 0, sum(u) = 1`.
//!
//! The fit is solved as the standard-form LP
//! `min 1'v + 1'w  s.t.  W u + v - w = b, 1'u = 1, (u, v, w) >= 0`
//! by the dense revised simplex in [`simplex`].

pub mod simplex;

use std::io::Write;

use crate::basis::{DesignMatrix, MomentVector};
use crate::domain::{Dataset, Lattice};
use crate::error::{Error, Result};

pub use simplex::{DenseLp, SimplexOptions, SimplexSolution, SimplexStatus};

/// The integer standard form obtained by scaling the lattice-valued fit by
/// `L`: `A = [[L W', L I, -L I], [1', 0, 0]]`, `b = [L b'; 1]`,
/// `c = [0; 1; 1]`, minimized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StandardLp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    pub c: Vec<i64>,
}

impl StandardLp {
    pub fn to_dense(&self) -> DenseLp {
        DenseLp {
            rows: self.rows,
            cols: self.cols,
            a: self.a.iter().map(|&v| v as f64).collect(),
            b: self.b.iter().map(|&v| v as f64).collect(),
            c: self.c.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Plain-text dump: a `rows cols` header, then `A` row-major one row per
    /// line, then `b` and `c` on one line each.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.rows, self.cols)?;
        for row in self.a.chunks(self.cols) {
            writeln!(out, "{}", join(row))?;
        }
        writeln!(out, "{}", join(&self.b))?;
        writeln!(out, "{}", join(&self.c))
    }
}

fn join(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

fn lattice_index(v: f64, lat: &Lattice) -> Result<i64> {
    lat.index_of(v).ok_or(Error::OffLattice {
        value: v,
        lattice: lat.size(),
    })
}

/// Builds the integer standard form. Every entry of `w` and `b` must be a
/// lattice value `i / L`, which makes `L * entry` the exact integer `i`.
pub fn to_standard_form(w: &DesignMatrix, b: &MomentVector, lat: &Lattice) -> Result<StandardLp> {
    let (rb, cs) = (w.rows(), w.cols());
    if b.len() != rb {
        return Err(Error::param("moment vector length does not match the design matrix"));
    }
    let rows = rb + 1;
    let cols = cs + 2 * rb;
    let l = lat.size() as i64;
    let mut a = vec![0i64; rows * cols];
    for r in 0..rb {
        for k in 0..cs {
            a[r * cols + k] = lattice_index(w.get(r, k), lat)?;
        }
        a[r * cols + cs + r] = l;
        a[r * cols + cs + rb + r] = -l;
    }
    for k in 0..cs {
        a[rb * cols + k] = 1;
    }
    let mut bb = b
        .values
        .iter()
        .map(|&v| lattice_index(v, lat))
        .collect::<Result<Vec<_>>>()?;
    bb.push(1);
    let mut c = vec![0i64; cols];
    c[cs..].iter_mut().for_each(|v| *v = 1);
    Ok(StandardLp {
        rows,
        cols,
        a,
        b: bb,
        c,
    })
}

/// A distribution over explicit support points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    support: Dataset,
    weights: Vec<f64>,
}

impl ProbabilityVector {
    /// Validates the simplex constraints. Weights down to `-1e-12` are
    /// treated as rounding noise: clamped to zero and the rest rescaled.
    pub fn new(support: Dataset, mut weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::param("support and weights differ in length"));
        }
        if weights.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(w) = weights.iter().find(|&&w| !(w >= -1e-12)) {
            return Err(Error::param(format!("negative weight {w}")));
        }
        weights.iter_mut().for_each(|w| *w = w.max(0.0));
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("weights sum to {total}, not 1")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { support, weights })
    }

    pub fn point_mass(support: Dataset, index: usize) -> Result<Self> {
        let mut w = vec![0.0; support.len()];
        *w.get_mut(index).ok_or_else(|| Error::param("index outside support"))? = 1.0;
        Self::new(support, w)
    }

    pub fn support(&self) -> &Dataset {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Clone, Debug)]
pub struct L1Fit {
    pub distribution: ProbabilityVector,
    /// `||W u - b||_1` at the returned weights.
    pub objective: f64,
    /// Reduced costs verified nonnegative within `1e-7`.
    pub dual_certified: bool,
    /// Set when the solver stopped before proving optimality.
    pub degraded: bool,
    pub iterations: usize,
}

pub fn solve_l1_fit(w: &DesignMatrix, b: &MomentVector, support: &Dataset) -> Result<L1Fit> {
    solve_l1_fit_with(w, b, support, &SimplexOptions::default())
}

pub fn solve_l1_fit_with(
    w: &DesignMatrix,
    b: &MomentVector,
    support: &Dataset,
    opts: &SimplexOptions,
) -> Result<L1Fit> {
    let (rb, cs) = (w.rows(), w.cols());
    if cs == 0 {
        return Err(Error::param("the design matrix has no columns"));
    }
    if support.len() != cs {
        return Err(Error::param("support size does not match the design matrix"));
    }
    if b.len() != rb {
        return Err(Error::param("moment vector length does not match the design matrix"));
    }
    let rows = rb + 1;
    let cols = cs + 2 * rb;
    let mut a = vec![0.0; rows * cols];
    for r in 0..rb {
        a[r * cols..r * cols + cs].copy_from_slice(w.row(r));
        a[r * cols + cs + r] = 1.0;
        a[r * cols + cs + rb + r] = -1.0;
    }
    a[rb * cols..rb * cols + cs].iter_mut().for_each(|v| *v = 1.0);
    let mut rhs = b.values.clone();
    rhs.push(1.0);
    let mut c = vec![0.0; cols];
    c[cs..].iter_mut().for_each(|v| *v = 1.0);
    let lp = DenseLp::new(rows, cols, a, rhs, c)?;

    // Start at the vertex u = e_j for the column with the smallest residual,
    // with each row's residual carried by v_r or w_r according to its sign.
    let residual_of = |k: usize| -> f64 {
        (0..rb).map(|r| (b.values[r] - w.get(r, k)).abs()).sum()
    };
    let start_col = (0..cs)
        .min_by(|&x, &y| residual_of(x).total_cmp(&residual_of(y)))
        .unwrap();
    let mut basis: Vec<usize> = (0..rb)
        .map(|r| {
            if b.values[r] - w.get(r, start_col) >= 0.0 {
                cs + r
            } else {
                cs + rb + r
            }
        })
        .collect();
    basis.push(start_col);

    let sol = simplex::solve(&lp, Some(&basis), opts)?;
    let fit = fit_from_solution(&sol, w, b, support)?;
    if sol.status == SimplexStatus::IterationLimit {
        return Err(Error::LpIterationLimit {
            iterations: sol.iterations,
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

fn fit_from_solution(
    sol: &SimplexSolution,
    w: &DesignMatrix,
    b: &MomentVector,
    support: &Dataset,
) -> Result<L1Fit> {
    let cs = w.cols();
    let mut u: Vec<f64> = sol.x[..cs].iter().map(|v| v.max(0.0)).collect();
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= total);
    let objective = l1_residual(w, &u, &b.values);
    Ok(L1Fit {
        distribution: ProbabilityVector::new(support.clone(), u)?,
        objective,
        dual_certified: sol.min_reduced_cost >= -1e-7,
        degraded: sol.status != SimplexStatus::Optimal,
        iterations: sol.iterations,
    })
}

/// `||W u - b||_1`.
pub fn l1_residual(w: &DesignMatrix, u: &[f64], b: &[f64]) -> f64 {
    w.apply(u).iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::MomentKind;
    use crate::domain::Stage;

    fn support(n: usize) -> Dataset {
        let coords = (0..n).map(|i| i as f64 / n as f64).collect();
        Dataset::new(coords, 1, Stage::Discretized).unwrap()
    }

    fn moments(v: &[f64]) -> MomentVector {
        MomentVector {
            values: v.to_vec(),
            kind: MomentKind::Rounded,
        }
    }

    #[test]
    fn standard_form_example() {
        let w = DesignMatrix::from_rows(1, 1, vec![1.0]).unwrap();
        let lat = Lattice::new(2).unwrap();
        let lp = to_standard_form(&w, &moments(&[0.5]), &lat).unwrap();
        assert_eq!((lp.rows, lp.cols), (2, 3));
        assert_eq!(lp.a, vec![2, 2, -2, 1, 0, 0]);
        assert_eq!(lp.b, vec![1, 1]);
        assert_eq!(lp.c, vec![0, 1, 1]);
    }

    #[test]
    fn standard_form_shape_and_zero_target() {
        let w = DesignMatrix::from_rows(3, 4, vec![0.25; 12]).unwrap();
        let lat = Lattice::new(4).unwrap();
        let lp = to_standard_form(&w, &moments(&[0.0, 0.0, 0.0]), &lat).unwrap();
        assert_eq!((lp.rows, lp.cols), (4, 10));
        assert_eq!(lp.b, vec![0, 0, 0, 1]);
        assert!(lp.a.iter().all(|v| v.abs() <= 4));
    }

    #[test]
    fn standard_form_rejects_off_lattice() {
        let w = DesignMatrix::from_rows(1, 1, vec![0.3]).unwrap();
        let lat = Lattice::new(4).unwrap();
        assert!(matches!(
            to_standard_form(&w, &moments(&[0.25]), &lat),
            Err(Error::OffLattice { .. })
        ));
    }

    #[test]
    fn text_dump_format() {
        let w = DesignMatrix::from_rows(1, 1, vec![1.0]).unwrap();
        let lat = Lattice::new(2).unwrap();
        let lp = to_standard_form(&w, &moments(&[0.5]), &lat).unwrap();
        let mut buf = Vec::new();
        lp.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2 3\n2 2 -2\n1 0 0\n1 1\n0 1 1\n");
    }

    #[test]
    fn exact_column_match() {
        let w = DesignMatrix::from_rows(2, 3, vec![1.0, 1.0, 1.0, -0.5, 0.0, 0.5]).unwrap();
        let fit = solve_l1_fit(&w, &moments(&[1.0, 0.5]), &support(3)).unwrap();
        assert!(fit.objective < 1e-12);
        assert!((fit.distribution.weights()[2] - 1.0).abs() < 1e-12);
        assert!(fit.dual_certified && !fit.degraded);
    }

    #[test]
    fn single_column() {
        let w = DesignMatrix::from_rows(2, 1, vec![1.0, 0.0]).unwrap();
        let fit = solve_l1_fit(&w, &moments(&[1.0, 0.0]), &support(1)).unwrap();
        assert_eq!(fit.distribution.weights(), &[1.0]);
        assert!(fit.objective < 1e-15);
    }

    #[test]
    fn two_column_mixture() {
        let w = DesignMatrix::from_rows(1, 2, vec![1.0, -1.0]).unwrap();
        let fit = solve_l1_fit(&w, &moments(&[0.5]), &support(2)).unwrap();
        assert!(fit.objective < 1e-12);
        let u = fit.distribution.weights();
        assert!((u[0] - 0.75).abs() < 1e-12 && (u[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn scaled_integer_form_has_same_optimum() {
        let lat = Lattice::new(8).unwrap();
        let w = DesignMatrix::from_rows(
            3,
            4,
            vec![
                1.0, 1.0, 1.0, 1.0, //
                -0.75, -0.25, 0.25, 0.75, //
                0.125, -0.875, -0.875, 0.125,
            ],
        )
        .unwrap();
        let b = moments(&[1.0, 0.875, -0.5]);
        let fit = solve_l1_fit(&w, &b, &support(4)).unwrap();
        let std = to_standard_form(&w, &b, &lat).unwrap();
        let sol = simplex::solve(&std.to_dense(), None, &SimplexOptions::default()).unwrap();
        assert!((sol.objective - fit.objective).abs() < 1e-9);
        assert!(fit.objective > 0.1);
    }

    #[test]
    fn probability_vector_cleanup() {
        let p = ProbabilityVector::new(support(2), vec![1.0 + 5e-13, -5e-13]).unwrap();
        assert_eq!(p.weights()[1], 0.0);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(ProbabilityVector::new(support(2), vec![1.1, -0.1]).is_err());
        assert!(ProbabilityVector::new(support(2), vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn iteration_limit_is_an_error_with_a_feasible_iterate() {
        let w = DesignMatrix::from_rows(
            2,
            4,
            vec![1.0, 1.0, 1.0, 1.0, -1.0, -0.5, 0.5, 1.0],
        )
        .unwrap();
        let b = moments(&[1.0, 0.1]);
        let opts = SimplexOptions {
            max_iterations: 0,
            ..SimplexOptions::default()
        };
        match solve_l1_fit_with(&w, &b, &support(4), &opts) {
            Err(Error::LpIterationLimit { best, .. }) => {
                assert!(best.degraded);
                let sum: f64 = best.distribution.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
            other => panic!("expected iteration limit, got {other:?}"),
        }
    }
}
