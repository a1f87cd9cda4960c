//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use synthdb::basis::DesignMatrix;

/// `||W u - b||_1`, written out directly.
pub fn l1_objective(w: &DesignMatrix, u: &[f64], b: &[f64]) -> f64 {
    (0..w.rows())
        .map(|r| {
            let s: f64 = (0..w.cols()).map(|k| w.get(r, k) * u[k]).sum();
            (s - b[r]).abs()
        })
        .sum()
}

/// Minimum of `||W u - b||_1` over the simplex by enumerating every basis of
/// the standard form `[W I -I; 1' 0 0] x = [b; 1]` and keeping the feasible
/// ones. Exponential, so only for tiny instances.
pub fn vertex_enumeration_min(w: &DesignMatrix, b: &[f64]) -> f64 {
    let (rb, s) = (w.rows(), w.cols());
    let rows = rb + 1;
    let cols = s + 2 * rb;
    let a = DMatrix::from_fn(rows, cols, |i, j| {
        if i == rb {
            if j < s {
                1.0
            } else {
                0.0
            }
        } else if j < s {
            w.get(i, j)
        } else if j == s + i {
            1.0
        } else if j == s + rb + i {
            -1.0
        } else {
            0.0
        }
    });
    let mut rhs: Vec<f64> = b.to_vec();
    rhs.push(1.0);
    let rhs = DVector::from_vec(rhs);
    let mut best = f64::INFINITY;
    let mut basis: Vec<usize> = (0..rows).collect();
    loop {
        let sub = DMatrix::from_fn(rows, rows, |i, j| a[(i, basis[j])]);
        if let Some(x) = sub.clone().lu().solve(&rhs) {
            if x.iter().all(|v| v.is_finite() && *v >= -1e-9) {
                let obj: f64 = basis
                    .iter()
                    .zip(x.iter())
                    .filter(|(&j, _)| j >= s)
                    .map(|(_, v)| v)
                    .sum();
                // guard against near-singular solves
                let resid = (&sub * &x - &rhs).amax();
                if resid < 1e-8 {
                    best = best.min(obj);
                }
            }
        }
        if !next_combination(&mut basis, cols) {
            break;
        }
    }
    best
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimum of `||W u - b||_1` over the simplex points whose weights are
/// multiples of `1/res`.
pub fn simplex_grid_min(w: &DesignMatrix, b: &[f64], res: usize) -> f64 {
    let s = w.cols();
    let mut counts = vec![0usize; s];
    let mut best = f64::INFINITY;
    grid_rec(w, b, res, 0, res, &mut counts, &mut best);
    best
}

fn grid_rec(
    w: &DesignMatrix,
    b: &[f64],
    res: usize,
    k: usize,
    left: usize,
    counts: &mut Vec<usize>,
    best: &mut f64,
) {
    let s = counts.len();
    if k == s - 1 {
        counts[k] = left;
        let u: Vec<f64> = counts.iter().map(|&c| c as f64 / res as f64).collect();
        *best = best.min(l1_objective(w, &u, b));
        return;
    }
    for c in 0..=left {
        counts[k] = c;
        grid_rec(w, b, res, k + 1, left - c, counts, best);
    }
}

/// Eigenvalues (descending) and matching unit eigenvectors of a symmetric
/// matrix.
pub fn sorted_eigen(a: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let e = SymmetricEigen::new(a.clone());
    let mut idx: Vec<usize> = (0..a.nrows()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    (
        idx.iter().map(|&i| e.eigenvalues[i]).collect(),
        idx.iter()
            .map(|&i| e.eigenvectors.column(i).iter().copied().collect())
            .collect(),
    )
}

/// Random symmetric PSD matrix `Q diag(lambda) Q'` with the given spectrum.
pub fn psd_with_spectrum<R: Rng>(lambda: &[f64], rng: &mut R) -> DMatrix<f64> {
    let d = lambda.len();
    let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    let q = g.qr().q();
    &q * DMatrix::from_diagonal(&DVector::from_row_slice(lambda)) * q.transpose()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
