//! Tensor-product Chebyshev basis: enumeration, evaluation, moments and the
//! design matrix of the distribution-fitting LP.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Lattice};
use crate::error::{Error, Result};

/// Degree tuple `(r_1, ..., r_d)` of a tensor Chebyshev basis function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSet {
    t: u32,
    d: usize,
    indices: Vec<MultiIndex>,
}

impl BasisSet {
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    fn max_degree(&self) -> u32 {
        self.indices
            .iter()
            .flat_map(|r| r.0.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

/// `T_k(x)` by the three-term recurrence `T_{k+1} = 2x T_k - T_{k-1}`.
pub fn chebyshev_t(k: u32, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..k {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Fills `out[k] = T_k(x)` for `k < out.len()`.
fn chebyshev_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        out[k] = 2.0 * x * out[k - 1] - out[k - 2];
    }
}

/// `prod_i T_{r_i}(x_i)`.
pub fn cheb_eval(r: &MultiIndex, x: &[f64]) -> f64 {
    debug_assert_eq!(r.dim(), x.len());
    r.0.iter().zip(x).map(|(&k, &xi)| chebyshev_t(k, xi)).product()
}

/// Enumerates `{0..t-1}^d` in row-major order, or its first `r` members under
/// the (total degree, lexicographic) order when `r` is given.
pub fn enumerate_basis(t: u32, d: usize, r: Option<u64>) -> Result<BasisSet> {
    if t == 0 || d == 0 {
        return Err(Error::param("t and d must be positive"));
    }
    let full = (t as u64)
        .checked_pow(d as u32)
        .filter(|&c| c <= usize::MAX as u64);
    if let Some(r) = r {
        if r == 0 {
            return Err(Error::param("basis subset size R must be positive"));
        }
        if full.is_some_and(|f| r > f) {
            return Err(Error::param(format!(
                "basis subset size R = {r} exceeds t^d = {}",
                full.unwrap()
            )));
        }
        return Ok(BasisSet {
            t,
            d,
            indices: lowest_degree_indices(t, d, r as usize),
        });
    }
    let count = full.ok_or_else(|| Error::param("t^d is too large to enumerate"))? as usize;
    let mut indices = Vec::with_capacity(count);
    let mut idx = vec![0u32; d];
    for _ in 0..count {
        indices.push(MultiIndex(idx.clone()));
        for axis in (0..d).rev() {
            idx[axis] += 1;
            if idx[axis] < t {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(BasisSet { t, d, indices })
}

/// First `count` multi-indices in `{0..t-1}^d` ordered by total degree, ties
/// broken lexicographically. Generated degree by degree so that huge `t^d`
/// never has to be materialized.
fn lowest_degree_indices(t: u32, d: usize, count: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(count);
    let max_degree = (t - 1) as u64 * d as u64;
    let mut degree = 0u64;
    while out.len() < count && degree <= max_degree {
        let mut current = vec![0u32; d];
        compositions(degree, t - 1, 0, &mut current, &mut out, count);
        degree += 1;
    }
    out
}

// Lexicographic enumeration of d-tuples with entries <= cap summing to `left`.
fn compositions(
    left: u64,
    cap: u32,
    axis: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
    limit: usize,
) {
    if out.len() >= limit {
        return;
    }
    let d = current.len();
    if axis == d - 1 {
        if left <= cap as u64 {
            current[axis] = left as u32;
            out.push(MultiIndex(current.clone()));
        }
        return;
    }
    let remaining_axes = (d - axis - 1) as u64;
    let lo = left.saturating_sub(remaining_axes * cap as u64);
    let hi = left.min(cap as u64);
    for v in lo..=hi {
        current[axis] = v as u32;
        compositions(left - v, cap, axis + 1, current, out, limit);
        if out.len() >= limit {
            return;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentKind {
    True,
    Noisy,
    Rounded,
    Synthetic,
}

/// Basis-query answers aligned with a [`BasisSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub values: Vec<f64>,
    pub kind: MomentKind,
}

impl MomentVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entrywise lattice rounding of (clamped) values.
    pub fn rounded(&self, lat: &Lattice) -> MomentVector {
        MomentVector {
            values: self.values.iter().map(|&v| round_to_lattice(v, lat)).collect(),
            kind: MomentKind::Rounded,
        }
    }
}

/// Per-point evaluation of every basis function, accumulated in dataset
/// order. The summation order is fixed, so results are reproducible.
fn basis_sums(data: &Dataset, basis: &BasisSet) -> Vec<f64> {
    let d = basis.dim();
    let width = basis.max_degree() as usize + 1;
    let mut table = vec![0.0; d * width];
    let mut acc = vec![0.0; basis.len()];
    for x in data.points() {
        for (axis, &xi) in x.iter().enumerate() {
            chebyshev_table(xi, &mut table[axis * width..(axis + 1) * width]);
        }
        for (a, r) in acc.iter_mut().zip(basis.indices()) {
            let mut v = 1.0;
            for (axis, &k) in r.0.iter().enumerate() {
                v *= table[axis * width + k as usize];
            }
            *a += v;
        }
    }
    acc
}

/// Average of every basis function over the dataset.
pub fn compute_moments(data: &Dataset, basis: &BasisSet) -> Result<MomentVector> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != basis.dim() {
        return Err(Error::param(format!(
            "dataset dimension {} does not match basis dimension {}",
            data.dim(),
            basis.dim()
        )));
    }
    let n = data.len() as f64;
    let values = basis_sums(data, basis).into_iter().map(|s| s / n).collect();
    Ok(MomentVector {
        values,
        kind: MomentKind::True,
    })
}

/// Nearest lattice value after clamping to `[-1, 1]`; ties round up.
pub fn round_to_lattice(v: f64, lat: &Lattice) -> f64 {
    lat.value(lat.round_index(v))
}

/// Basis functions (rows) evaluated at support points (columns), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    lattice: Option<Lattice>,
}

impl DesignMatrix {
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::param("design matrix entries do not match its shape"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            lattice: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, k: usize) -> f64 {
        self.entries[r * self.cols + k]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, k))
    }

    /// The lattice the entries were rounded to, if any.
    pub fn lattice(&self) -> Option<Lattice> {
        self.lattice
    }

    /// Entrywise lattice rounding (`W'` in the LP).
    pub fn rounded(&self, lat: &Lattice) -> DesignMatrix {
        DesignMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&v| round_to_lattice(v, lat)).collect(),
            lattice: Some(*lat),
        }
    }

    /// `W u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(u).map(|(w, x)| w * x).sum())
            .collect()
    }
}

/// Evaluates each basis function at each support point.
pub fn build_design_matrix(basis: &BasisSet, support: &Dataset) -> Result<DesignMatrix> {
    if support.dim() != basis.dim() {
        return Err(Error::param("support dimension does not match the basis"));
    }
    let d = basis.dim();
    let cols = support.len();
    let width = basis.max_degree() as usize + 1;
    let mut entries = vec![0.0; basis.len() * cols];
    let mut table = vec![0.0; d * width];
    for (k, x) in support.points().enumerate() {
        for (axis, &xi) in x.iter().enumerate() {
            chebyshev_table(xi, &mut table[axis * width..(axis + 1) * width]);
        }
        for (row, r) in basis.indices().iter().enumerate() {
            let mut v = 1.0;
            for (axis, &deg) in r.0.iter().enumerate() {
                v *= table[axis * width + deg as usize];
            }
            entries[row * cols + k] = v;
        }
    }
    DesignMatrix::from_rows(basis.len(), cols, entries)
}
