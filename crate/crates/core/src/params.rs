//! Privacy budgets and the parameter schedule `(t, N, m, L)` derived from
//! `(n, d, K, delta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// epsilon-differential privacy.
    Pure,
    /// (epsilon, delta)-differential privacy.
    Approx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    /// Zero means pure differential privacy.
    pub delta: f64,
    /// Share of the budget spent on private PCA in accelerated mode.
    pub pca_fraction: f64,
}

impl PrivacyBudget {
    pub const DEFAULT_PCA_FRACTION: f64 = 0.5;

    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        Self::with_pca_fraction(epsilon, delta, Self::DEFAULT_PCA_FRACTION)
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn with_pca_fraction(epsilon: f64, delta: f64, pca_fraction: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::param(format!("delta must lie in [0, 1), got {delta}")));
        }
        if !(0.0..1.0).contains(&pca_fraction) {
            return Err(Error::param(format!(
                "pca_fraction must lie in [0, 1), got {pca_fraction}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            pca_fraction,
        })
    }

    pub fn mode(&self) -> Mode {
        if self.delta > 0.0 {
            Mode::Approx
        } else {
            Mode::Pure
        }
    }

    /// Budget left for the moment release after the PCA stage.
    pub fn moment_share(&self) -> StageBudget {
        StageBudget {
            epsilon: (1.0 - self.pca_fraction) * self.epsilon,
            delta: (1.0 - self.pca_fraction) * self.delta,
        }
    }

    /// Budget consumed by the PCA stage (subspace iteration plus private mean).
    pub fn pca_share(&self) -> StageBudget {
        StageBudget {
            epsilon: self.pca_fraction * self.epsilon,
            delta: self.pca_fraction * self.delta,
        }
    }

    pub fn whole(&self) -> StageBudget {
        StageBudget {
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }
}

/// The `(epsilon, delta)` handed to one stage of a composed release.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl StageBudget {
    pub fn scaled(&self, fraction: f64) -> StageBudget {
        StageBudget {
            epsilon: self.epsilon * fraction,
            delta: self.delta * fraction,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accelerated {
    /// Grid-subset size.
    pub c: u64,
    /// Number of basis functions kept.
    pub r: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Per-axis degree bound: basis multi-indices range over `{0..t-1}^d`.
    pub t: u32,
    /// Grid resolution per axis.
    pub n_grid: u32,
    /// Synthetic database size given by the schedule.
    pub m: u64,
    /// Rounding lattice size.
    pub l: u32,
    pub mode: Mode,
    pub accelerated: Option<Accelerated>,
}

impl MechanismParams {
    /// `t^d`, the size of the full basis.
    pub fn full_basis_count(&self, d: usize) -> Option<u64> {
        (self.t as u64).checked_pow(d as u32)
    }
}

/// `ceil(x)`, except that values within a relative `1e-9` of an integer snap
/// to that integer first.
pub(crate) fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn to_u32(x: f64, what: &str) -> Result<u32> {
    if x >= 1.0 && x <= u32::MAX as f64 {
        Ok(x as u32)
    } else {
        Err(Error::param(format!("{what} = {x} is out of range")))
    }
}

fn to_u64(x: f64, what: &str) -> Result<u64> {
    if x >= 1.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(Error::param(format!("{what} = {x} is out of range")))
    }
}

fn check_shape(n: usize, d: usize, k: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!("need at least 2 records, got {n}")));
    }
    if d == 0 || k == 0 {
        return Err(Error::param("d and K must be positive"));
    }
    Ok(())
}

/// Parameter schedule for the epsilon-DP mechanism.
pub fn derive_params_pure(n: usize, d: usize, k: u32) -> Result<MechanismParams> {
    check_shape(n, d, k)?;
    let n = n as f64;
    let (d, k) = (d as f64, k as f64);
    let denom = 2.0 * d + k;
    let pow = |e: f64| snapped_ceil(n.powf(e / denom));
    Ok(MechanismParams {
        t: to_u32(pow(1.0), "t")?,
        n_grid: to_u32(pow(k), "N")?,
        m: to_u64(snapped_ceil(n.powf(1.0 + (k + 1.0) / denom)), "m")?,
        l: to_u32(pow(d + k), "L")?,
        mode: Mode::Pure,
        accelerated: None,
    })
}

/// Parameter schedule for the (epsilon, delta)-DP mechanism. `log` is the
/// natural logarithm.
pub fn derive_params_approx(n: usize, d: usize, k: u32, delta: f64) -> Result<MechanismParams> {
    check_shape(n, d, k)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
    }
    let n = n as f64;
    let log_inv = (1.0 / delta).ln();
    let (d, k) = (d as f64, k as f64);
    let denom = 3.0 * d + 2.0 * k;
    let term = |n_exp: f64, log_exp: f64| {
        snapped_ceil(n.powf(n_exp / denom) * log_inv.powf(-log_exp / denom))
    };
    Ok(MechanismParams {
        t: to_u32(term(2.0, 1.0), "t")?,
        n_grid: to_u32(term(2.0 * k, k), "N")?,
        m: to_u64(
            term(4.0 * d + 4.0 * k + 2.0, 2.0 * d + 2.0 * k + 1.0),
            "m",
        )?,
        l: to_u32(term(2.0 * d + 2.0 * k, d + k), "L")?,
        mode: Mode::Approx,
        accelerated: None,
    })
}

/// Default number of basis functions for the accelerated mechanism, with the
/// Gaussian bandwidth squared standing in for the smoothness order:
/// `ceil(c * n^(d / (2d + s)))` (pure) or `ceil(c * n^(2d / (3d + 2s)))`
/// (approx), where `s = sigma^2`.
pub fn default_basis_subset(n: usize, d: usize, sigma_sq: f64, mode: Mode, c: f64) -> Result<u64> {
    if !(sigma_sq > 0.0) || !(c > 0.0) {
        return Err(Error::param("sigma^2 and the constant must be positive"));
    }
    let (n, d) = (n as f64, d as f64);
    let exponent = match mode {
        Mode::Pure => d / (2.0 * d + sigma_sq),
        Mode::Approx => 2.0 * d / (3.0 * d + 2.0 * sigma_sq),
    };
    to_u64(snapped_ceil(c * n.powf(exponent)), "R")
}
