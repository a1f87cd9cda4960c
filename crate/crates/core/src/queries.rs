//! Gaussian-kernel queries, random workloads, a finite-difference K-norm
//! estimate and error metrics.
//!
//! Relative error is only meaningful for queries whose true answer is far
//! from zero. With nonnegative weights, as generated here, answers are
//! positive; with signed weights the relative error can mislead.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};

/// `f(x) = sum_j alpha_j exp(-||x - c_j||^2 / (2 sigma^2))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernelQuery {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma: f64,
    /// Set when `||weights||_1 <= 1` is guaranteed.
    #[serde(default)]
    pub norm_certified: bool,
}

impl GaussianKernelQuery {
    pub fn new(centers: Vec<Vec<f64>>, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(Error::param("centers and weights differ in length"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("bandwidth must be positive, got {sigma}")));
        }
        if let Some(d) = centers.first().map(Vec::len) {
            if d == 0 || centers.iter().any(|c| c.len() != d) {
                return Err(Error::param("centers must share a positive dimension"));
            }
        }
        // rescaled weights can overshoot 1 by a rounding error
        let norm_certified = weights.iter().map(|w| w.abs()).sum::<f64>() <= 1.0 + 1e-12;
        Ok(Self {
            centers,
            weights,
            sigma,
            norm_certified,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        self.centers.first().map(Vec::len)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, &a)| {
                let sq: f64 = c.iter().zip(x).map(|(ci, xi)| (xi - ci) * (xi - ci)).sum();
                a * (-sq * inv).exp()
            })
            .sum()
    }
}

/// `(1/|D|) sum_{x in D} f(x)`, summed in dataset order.
pub fn evaluate_query(q: &GaussianKernelQuery, db: &Dataset) -> Result<f64> {
    if db.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if q.dim().is_some_and(|d| d != db.dim()) {
        return Err(Error::param("query and database dimensions differ"));
    }
    Ok(db.points().map(|x| q.eval(x)).sum::<f64>() / db.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `alpha_j ~ U[0, 1]` as drawn, so `||alpha||_1` can reach `J`.
    #[default]
    Raw,
    /// Draws rescaled so that `||alpha||_1 <= 1`.
    NormCertified,
}

/// `count` independent queries with `j` kernels each, centers uniform in the
/// cube and weights uniform in `[0, 1]`.
pub fn random_queries<R: Rng + ?Sized>(
    count: usize,
    j: usize,
    d: usize,
    sigma: f64,
    scheme: WeightScheme,
    rng: &mut R,
) -> Result<Vec<GaussianKernelQuery>> {
    if count == 0 || j == 0 || d == 0 {
        return Err(Error::param("count, J and d must be positive"));
    }
    (0..count)
        .map(|_| {
            let centers = (0..j)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect();
            let mut weights: Vec<f64> = (0..j).map(|_| rng.random::<f64>()).collect();
            if scheme == WeightScheme::NormCertified {
                let sum: f64 = weights.iter().sum();
                if sum > 1.0 {
                    weights.iter_mut().for_each(|w| *w /= sum);
                }
            }
            GaussianKernelQuery::new(centers, weights, sigma)
        })
        .collect()
}

/// Highest derivative order the finite-difference estimate supports.
pub const KNORM_MAX_ORDER: u32 = 6;

const KNORM_LATTICE: usize = 20;
const KNORM_ACTIVE_DIMS: usize = 3;

/// Finite-difference weights for the `order`-th derivative at 0 on the
/// given nodes (Fornberg's recursion), for unit spacing.
fn fornberg(order: usize, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Second-order central stencils for orders `0..=k`: offsets and weights.
fn central_stencils(k: usize) -> Vec<(Vec<i32>, Vec<f64>)> {
    (0..=k)
        .map(|o| {
            let p = if o == 0 { 0 } else { (o as i32 + 1) / 2 };
            let offsets: Vec<i32> = (-p..=p).collect();
            let nodes: Vec<f64> = offsets.iter().map(|&v| v as f64).collect();
            (offsets, fornberg(o, &nodes))
        })
        .collect()
}

/// Lower estimate of `||f||_K = sup_{|k| <= K} sup_x |D^k f(x)|`.
///
/// Derivatives are central finite differences with step `h`, taken along at
/// most three active coordinates (the first ones); the other coordinates are
/// held at kernel-center values. The supremum runs over a 20-point-per-axis
/// lattice on the active coordinates and over the kernel centers.
pub fn knorm_estimate(q: &GaussianKernelQuery, k: u32, h: f64) -> Result<f64> {
    if k > KNORM_MAX_ORDER {
        return Err(Error::param(format!(
            "K = {k} exceeds the supported order {KNORM_MAX_ORDER}"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::param("step size must be positive"));
    }
    let Some(d) = q.dim() else {
        return Ok(0.0);
    };
    let k = k as usize;
    let active = d.min(KNORM_ACTIVE_DIMS);
    let stencils = central_stencils(k);
    let inv = 1.0 / (2.0 * q.sigma * q.sigma);
    let g = |z: f64| (-z * z * inv).exp();
    // derivs(x, c)[o] approximates the o-th derivative of g(. - c) at x
    let derivs = |x: f64, c: f64| -> Vec<f64> {
        stencils
            .iter()
            .enumerate()
            .map(|(o, (offs, w))| {
                let s: f64 = offs
                    .iter()
                    .zip(w)
                    .map(|(&i, &wi)| wi * g(x + i as f64 * h - c))
                    .sum();
                s / h.powi(o as i32)
            })
            .collect()
    };
    let multi = multi_indices(active, k);
    let jn = q.centers.len();

    let eval_point = |tables: &[Vec<Vec<f64>>], inactive: &[f64]| -> f64 {
        // tables[j][axis][order], inactive[j] = product over fixed coordinates
        multi
            .iter()
            .map(|mi| {
                (0..jn)
                    .map(|j| {
                        let mut v = q.weights[j] * inactive[j];
                        for (axis, &o) in mi.iter().enumerate() {
                            v *= tables[j][axis][o];
                        }
                        v
                    })
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    };

    let mut best = 0.0f64;
    // kernel centers
    for center in &q.centers {
        let tables: Vec<Vec<Vec<f64>>> = q
            .centers
            .iter()
            .map(|c| (0..active).map(|a| derivs(center[a], c[a])).collect())
            .collect();
        let inactive: Vec<f64> = q
            .centers
            .iter()
            .map(|c| (active..d).map(|b| g(center[b] - c[b])).product())
            .collect();
        best = best.max(eval_point(&tables, &inactive));
    }
    // lattice on the active coordinates; per-axis tables are shared
    let grid: Vec<f64> = (0..KNORM_LATTICE)
        .map(|i| -1.0 + 2.0 * i as f64 / (KNORM_LATTICE - 1) as f64)
        .collect();
    // axis_tables[a][gi][j] = derivative table for lattice value gi
    let axis_tables: Vec<Vec<Vec<Vec<f64>>>> = (0..active)
        .map(|a| {
            grid.iter()
                .map(|&x| q.centers.iter().map(|c| derivs(x, c[a])).collect())
                .collect()
        })
        .collect();
    let mut anchors: Vec<Vec<f64>> = Vec::new();
    for c in &q.centers {
        let tail = c[active..].to_vec();
        if !anchors.contains(&tail) {
            anchors.push(tail);
        }
    }
    let points = KNORM_LATTICE.pow(active as u32);
    for anchor in &anchors {
        let inactive: Vec<f64> = q
            .centers
            .iter()
            .map(|c| anchor.iter().zip(&c[active..]).map(|(x, ci)| g(x - ci)).product())
            .collect();
        let mut idx = vec![0usize; active];
        for _ in 0..points {
            let tables: Vec<Vec<Vec<f64>>> = (0..jn)
                .map(|j| (0..active).map(|a| axis_tables[a][idx[a]][j].clone()).collect())
                .collect();
            best = best.max(eval_point(&tables, &inactive));
            for a in (0..active).rev() {
                idx[a] += 1;
                if idx[a] < KNORM_LATTICE {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
    Ok(best)
}

// All `dims`-tuples with entries summing to at most `k`.
fn multi_indices(dims: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                let used: usize = prefix.iter().sum();
                (0..=k - used).map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o);
                    p
                })
            })
            .collect();
    }
    out
}

/// Answers below this magnitude get no relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub abs_errors: Vec<f64>,
    /// `None` where the true answer is below [`REL_ERROR_FLOOR`].
    pub rel_errors: Vec<Option<f64>>,
    pub worst_abs: f64,
    pub worst_rel: f64,
    pub query_count: usize,
    /// Queries left out of the relative metrics.
    pub excluded: usize,
}

impl ErrorReport {
    pub fn median_rel(&self) -> Option<f64> {
        median(self.rel_errors.iter().flatten().copied().collect())
    }

    pub fn median_abs(&self) -> Option<f64> {
        median(self.abs_errors.clone())
    }

    pub fn mean_abs(&self) -> f64 {
        if self.abs_errors.is_empty() {
            0.0
        } else {
            self.abs_errors.iter().sum::<f64>() / self.abs_errors.len() as f64
        }
    }
}

/// Middle value, or the mean of the two middle values.
pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn error_metrics(truth: &[f64], synth: &[f64]) -> Result<ErrorReport> {
    if truth.len() != synth.len() {
        return Err(Error::param(format!(
            "{} true answers but {} synthetic answers",
            truth.len(),
            synth.len()
        )));
    }
    let abs_errors: Vec<f64> = truth.iter().zip(synth).map(|(t, s)| (t - s).abs()).collect();
    let rel_errors: Vec<Option<f64>> = truth
        .iter()
        .zip(&abs_errors)
        .map(|(t, e)| (t.abs() >= REL_ERROR_FLOOR).then(|| e / t.abs()))
        .collect();
    Ok(ErrorReport {
        worst_abs: abs_errors.iter().copied().fold(0.0, f64::max),
        worst_rel: rel_errors.iter().flatten().copied().fold(0.0, f64::max),
        excluded: rel_errors.iter().filter(|r| r.is_none()).count(),
        query_count: truth.len(),
        abs_errors,
        rel_errors,
    })
}
