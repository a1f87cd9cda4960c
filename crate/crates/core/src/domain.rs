//! Datasets, the Chebyshev discretization grid and the rounding lattice.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Normalized,
    Discretized,
}

/// An ordered collection of `n` points of dimension `d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    coords: Vec<f64>,
    dim: usize,
    stage: Stage,
    ranges: Option<Vec<(f64, f64)>>,
}

impl Dataset {
    /// Builds a dataset from row-major coordinates.
    ///
    /// Coordinates must be finite, and must lie in `[-1, 1]` unless the
    /// stage is [`Stage::Raw`].
    pub fn new(coords: Vec<f64>, dim: usize, stage: Stage) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDataset("dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidDataset(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite coordinate in point {}",
                bad / dim
            )));
        }
        if stage != Stage::Raw {
            if let Some(bad) = coords.iter().position(|v| !(-1.0..=1.0).contains(v)) {
                return Err(Error::InvalidDataset(format!(
                    "coordinate {} of point {} is outside [-1, 1]",
                    coords[bad],
                    bad / dim
                )));
            }
        }
        Ok(Self {
            coords,
            dim,
            stage,
            ranges: None,
        })
    }

    pub fn from_points(points: &[Vec<f64>], stage: Stage) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if let Some(i) = points.iter().position(|p| p.len() != dim) {
            return Err(Error::InvalidDataset(format!(
                "point {i} has dimension {} but expected {dim}",
                points[i].len()
            )));
        }
        Self::new(points.concat(), dim, stage)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Attribute ranges used for normalization, when known.
    pub fn ranges(&self) -> Option<&[(f64, f64)]> {
        self.ranges.as_deref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn with_ranges(mut self, ranges: Vec<(f64, f64)>) -> Self {
        self.ranges = Some(ranges);
        self
    }

    /// Replaces point `i`, keeping the stage invariants.
    pub fn replace_point(&mut self, i: usize, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::InvalidDataset("replacement has wrong dimension".into()));
        }
        if self.stage != Stage::Raw && point.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidDataset("replacement outside [-1, 1]".into()));
        }
        self.coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(point);
        Ok(())
    }
}

/// The Chebyshev grid `a_k = (2k + 1 - N) / N`, `k = 0..N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChebGrid {
    n: u32,
}

impl ChebGrid {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("grid resolution N must be positive"));
        }
        Ok(Self { n })
    }

    pub fn resolution(&self) -> u32 {
        self.n
    }

    pub fn value(&self, k: u32) -> f64 {
        debug_assert!(k < self.n);
        (2.0 * k as f64 + 1.0 - self.n as f64) / self.n as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.value(k)).collect()
    }

    /// Index of the grid value nearest to `z`; ties go to the larger value.
    pub fn nearest_index(&self, z: f64) -> u32 {
        let n = self.n as f64;
        // continuous position of z in index space
        let pos = (z * n + n - 1.0) / 2.0;
        let lo = pos.floor().clamp(0.0, n - 1.0) as u32;
        if lo + 1 >= self.n {
            return lo;
        }
        let d_lo = (z - self.value(lo)).abs();
        let d_hi = (z - self.value(lo + 1)).abs();
        if d_hi <= d_lo {
            lo + 1
        } else {
            lo
        }
    }

    pub fn nearest(&self, z: f64) -> f64 {
        self.value(self.nearest_index(z))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.nearest(x) == x
    }

    /// Number of points of the full `d`-dimensional grid, if it fits in `u128`.
    pub fn count(&self, d: usize) -> Option<u128> {
        (self.n as u128).checked_pow(u32::try_from(d).ok()?)
    }

    /// All `N^d` grid points in row-major order (last axis fastest).
    pub fn full_grid(&self, d: usize) -> Result<Dataset> {
        let total = self
            .count(d)
            .filter(|&c| c <= usize::MAX as u128 / d as u128)
            .ok_or_else(|| Error::param("grid too large to enumerate"))? as usize;
        let values = self.values();
        let mut coords = Vec::with_capacity(total * d);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            coords.extend(idx.iter().map(|&k| values[k]));
            for axis in (0..d).rev() {
                idx[axis] += 1;
                if idx[axis] < values.len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
        Dataset::new(coords, d, Stage::Discretized)
    }
}

/// The rounding lattice `{i / L : i = -L..=L}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    l: u32,
}

impl Lattice {
    pub fn new(l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::param("lattice size L must be positive"));
        }
        Ok(Self { l })
    }

    pub fn size(&self) -> u32 {
        self.l
    }

    pub fn step(&self) -> f64 {
        1.0 / self.l as f64
    }

    pub fn value(&self, i: i64) -> f64 {
        i as f64 / self.l as f64
    }

    /// Lattice index nearest to `v` after clamping to `[-1, 1]`; ties round up.
    pub fn round_index(&self, v: f64) -> i64 {
        let l = self.l as f64;
        let clamped = v.clamp(-1.0, 1.0);
        let lo = (clamped * l).floor() as i64;
        let lo = lo.clamp(-(self.l as i64), self.l as i64);
        if lo == self.l as i64 {
            return lo;
        }
        let d_lo = (clamped - self.value(lo)).abs();
        let d_hi = (self.value(lo + 1) - clamped).abs();
        if d_hi <= d_lo {
            lo + 1
        } else {
            lo
        }
    }

    /// Lattice index of `x` if `x` is exactly a lattice value.
    pub fn index_of(&self, x: f64) -> Option<i64> {
        let i = (x * self.l as f64).round() as i64;
        (i.abs() <= self.l as i64 && self.value(i) == x).then_some(i)
    }
}

/// Affinely maps each attribute from `[lo, hi]` onto `[-1, 1]`, clamping
/// values that fall outside the range.
///
/// With `ranges = None` the ranges are taken from the data itself. That choice
/// reads the private data outside the privacy accounting, so a warning is
/// logged.
pub fn normalize_dataset(raw: &Dataset, ranges: Option<&[(f64, f64)]>) -> Result<Dataset> {
    let d = raw.dim();
    let ranges: Vec<(f64, f64)> = match ranges {
        Some(r) => {
            if r.len() != d {
                return Err(Error::param(format!(
                    "{} ranges supplied for {d} attributes",
                    r.len()
                )));
            }
            r.to_vec()
        }
        None => {
            warn!(
                "normalization ranges computed from the data: this leaks information \
                 not covered by the privacy budget; supply public ranges instead"
            );
            data_ranges(raw)?
        }
    };
    if let Some((i, &(lo, hi))) = ranges
        .iter()
        .enumerate()
        .find(|(_, &(lo, hi))| !(hi > lo) || !lo.is_finite() || !hi.is_finite())
    {
        return Err(Error::param(format!(
            "degenerate range [{lo}, {hi}] for attribute {i}"
        )));
    }
    let coords = raw
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (lo, hi) = ranges[i % d];
            (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
        })
        .collect();
    Ok(Dataset::new(coords, d, Stage::Normalized)?.with_ranges(ranges))
}

fn data_ranges(raw: &Dataset) -> Result<Vec<(f64, f64)>> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = raw.dim();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for p in raw.points() {
        for (r, &x) in ranges.iter_mut().zip(p) {
            r.0 = r.0.min(x);
            r.1 = r.1.max(x);
        }
    }
    // constant attributes get a unit-width range so they map to -1
    for r in &mut ranges {
        if r.1 <= r.0 {
            r.1 = r.0 + 1.0;
        }
    }
    Ok(ranges)
}

/// Replaces every coordinate with its nearest grid value.
pub fn discretize(data: &Dataset, grid: &ChebGrid) -> Result<Dataset> {
    if data.stage() == Stage::Raw {
        return Err(Error::InvalidDataset(
            "discretize expects normalized data".into(),
        ));
    }
    let coords = data.coords().iter().map(|&z| grid.nearest(z)).collect();
    let mut out = Dataset::new(coords, data.dim(), Stage::Discretized)?;
    out.ranges = data.ranges.clone();
    Ok(out)
}
