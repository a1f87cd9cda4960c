//! Laplace and Gaussian noise, moment-noise calibration and an empirical
//! privacy audit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{MomentKind, MomentVector};
use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::params::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

/// A calibrated noise distribution. For Gaussian noise `scale` is the
/// standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
    /// Name of the random stream that feeds this noise.
    pub stream: String,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, scale: f64, stream: impl Into<String>) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param(format!("noise scale must be positive, got {scale}")));
        }
        Ok(Self {
            kind,
            scale,
            stream: stream.into(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Laplace => laplace_sample(self.scale, rng),
            NoiseKind::Gaussian => gaussian_sample(self.scale, rng),
        }
    }
}

/// Laplace scale for the moment release.
///
/// Pure mode uses `basis_count / (n * epsilon)`; approx mode uses
/// `sqrt(basis_count * ln(1/delta)) / (n * epsilon)`. With
/// `strict_sensitivity` the scale is doubled to account for the per-moment
/// sensitivity `2/n`.
pub fn moment_noise_scale(
    mode: Mode,
    basis_count: u64,
    n: usize,
    epsilon: f64,
    delta: f64,
    strict_sensitivity: bool,
) -> Result<f64> {
    if basis_count == 0 {
        return Err(Error::param("basis_count must be positive"));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    let denom = n as f64 * epsilon;
    let base = match mode {
        Mode::Pure => basis_count as f64 / denom,
        Mode::Approx => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
            }
            (basis_count as f64 * (1.0 / delta).ln()).sqrt() / denom
        }
    };
    Ok(if strict_sensitivity { 2.0 * base } else { base })
}

/// Inverse-CDF transform of `u` in `(-1/2, 1/2)` into a Laplace variate.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    -u.signum() * scale * (1.0 - 2.0 * u.abs()).ln()
}

pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        // u = -0.5 would map to an infinite draw
        if u > -0.5 {
            return laplace_from_uniform(u, scale);
        }
    }
}

pub fn gaussian_sample<R: Rng + ?Sized>(std_dev: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std_dev * z
}

/// Adds independent noise to every moment.
pub fn privatize_moments<R: Rng + ?Sized>(
    b: &MomentVector,
    spec: &NoiseSpec,
    rng: &mut R,
) -> MomentVector {
    MomentVector {
        values: b.values.iter().map(|&v| v + spec.sample(rng)).collect(),
        kind: MomentKind::Noisy,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuditConfig {
    pub samples: usize,
    pub bins: usize,
    /// Bins where either histogram holds fewer samples are ignored.
    pub min_bin_count: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            bins: 20,
            min_bin_count: 1000,
        }
    }
}

/// Empirical lower estimate of the privacy loss of a one-dimensional release
/// on a pair of neighbouring datasets.
///
/// Runs the release `samples` times on each dataset, bins both output samples
/// into equal-width bins over the joint observed range and returns the largest
/// absolute log ratio of add-one smoothed bin counts. Sparse bins are skipped
/// because their ratios are dominated by sampling noise.
pub fn epsilon_audit<F, R>(
    mut release: F,
    data: &Dataset,
    neighbor: &Dataset,
    cfg: &AuditConfig,
    rng: &mut R,
) -> Result<f64>
where
    F: FnMut(&Dataset, &mut R) -> f64,
    R: Rng + ?Sized,
{
    if cfg.samples < 10_000 {
        return Err(Error::param(format!(
            "audit needs at least 10^4 samples, got {}",
            cfg.samples
        )));
    }
    if cfg.bins == 0 {
        return Err(Error::param("audit needs at least one bin"));
    }
    if data.len() != neighbor.len() || data.dim() != neighbor.dim() {
        return Err(Error::param("neighbouring datasets must have the same shape"));
    }
    let differing = data
        .points()
        .zip(neighbor.points())
        .filter(|(a, b)| a != b)
        .count();
    if differing > 1 {
        return Err(Error::param(format!(
            "neighbouring datasets differ in {differing} points"
        )));
    }
    let a: Vec<f64> = (0..cfg.samples).map(|_| release(data, rng)).collect();
    let b: Vec<f64> = (0..cfg.samples).map(|_| release(neighbor, rng)).collect();
    let (lo, hi) = a
        .iter()
        .chain(&b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let width = (hi - lo) / cfg.bins as f64;
    let bin_of = |v: f64| -> usize {
        if width > 0.0 {
            (((v - lo) / width) as usize).min(cfg.bins - 1)
        } else {
            0
        }
    };
    let mut ca = vec![0u64; cfg.bins];
    let mut cb = vec![0u64; cfg.bins];
    a.iter().for_each(|&v| ca[bin_of(v)] += 1);
    b.iter().for_each(|&v| cb[bin_of(v)] += 1);
    let worst = ca
        .iter()
        .zip(&cb)
        .filter(|(&x, &y)| x.min(y) >= cfg.min_bin_count)
        .map(|(&x, &y)| ((x as f64 + 1.0) / (y as f64 + 1.0)).ln().abs())
        .fold(0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Stage;
    use crate::rng::stream;

    #[test]
    fn scale_examples() {
        let s = moment_noise_scale(Mode::Pure, 4, 256, 1.0, 0.0, false).unwrap();
        assert_eq!(s, 1.0 / 64.0);
        assert_eq!(moment_noise_scale(Mode::Pure, 1, 1, 1.0, 0.0, false).unwrap(), 1.0);
        let delta = (-1.0f64).exp();
        let a = moment_noise_scale(Mode::Approx, 16, 100, 1.0, delta, false).unwrap();
        assert!((a - 0.04).abs() < 1e-15);
        assert_eq!(moment_noise_scale(Mode::Pure, 4, 256, 1.0, 0.0, true).unwrap(), 1.0 / 32.0);
        assert!(moment_noise_scale(Mode::Pure, 0, 256, 1.0, 0.0, false).is_err());
        assert!(moment_noise_scale(Mode::Approx, 4, 256, 1.0, 0.0, false).is_err());
    }

    #[test]
    fn laplace_median_and_symmetry() {
        assert_eq!(laplace_from_uniform(0.0, 3.0), 0.0);
        let x = laplace_from_uniform(0.25, 1.0);
        assert!((x - 2f64.ln()).abs() < 1e-15);
        assert_eq!(laplace_from_uniform(-0.25, 1.0), -x);
    }

    #[test]
    fn laplace_moments() {
        let mut rng = stream(1, "laplace-test", 0);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| laplace_sample(1.0, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 2.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn draws_reproducible() {
        let spec = NoiseSpec::new(NoiseKind::Laplace, 0.5, "moments").unwrap();
        let b = MomentVector {
            values: vec![0.0; 16],
            kind: MomentKind::True,
        };
        let x = privatize_moments(&b, &spec, &mut stream(9, "moments", 0));
        let y = privatize_moments(&b, &spec, &mut stream(9, "moments", 0));
        assert_eq!(x, y);
        assert_eq!(x.kind, MomentKind::Noisy);
        assert_eq!(x.len(), 16);
    }

    #[test]
    fn tiny_scale_is_transparent() {
        let spec = NoiseSpec::new(NoiseKind::Laplace, 1e-15, "m").unwrap();
        let b = MomentVector {
            values: vec![0.3, -0.7, 1.0],
            kind: MomentKind::True,
        };
        let out = privatize_moments(&b, &spec, &mut stream(0, "m", 0));
        for (x, y) in out.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_noise_passes_ks_test() {
        let spec = NoiseSpec::new(NoiseKind::Laplace, 1.0, "m").unwrap();
        let b = MomentVector {
            values: vec![0.0; 100_000],
            kind: MomentKind::True,
        };
        let mut noisy = privatize_moments(&b, &spec, &mut stream(3, "m", 0)).values;
        noisy.sort_by(f64::total_cmp);
        let n = noisy.len() as f64;
        let cdf = |x: f64| {
            if x < 0.0 {
                0.5 * x.exp()
            } else {
                1.0 - 0.5 * (-x).exp()
            }
        };
        let ks = noisy
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov critical value at p = 0.01 is 1.628 / sqrt(n)
        assert!(ks < 1.628 / n.sqrt(), "ks statistic {ks}");
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = stream(2, "gauss", 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| gaussian_sample(2.0, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 4.0).abs() < 0.08);
    }

    #[test]
    fn audit_rejects_bad_inputs() {
        let d = Dataset::new(vec![0.0, 0.5], 1, Stage::Normalized).unwrap();
        let far = Dataset::new(vec![1.0, -0.5], 1, Stage::Normalized).unwrap();
        let mut rng = stream(0, "audit", 0);
        let small = AuditConfig {
            samples: 100,
            ..AuditConfig::default()
        };
        assert!(epsilon_audit(|_, _| 0.0, &d, &d, &small, &mut rng).is_err());
        assert!(epsilon_audit(|_, _| 0.0, &d, &far, &AuditConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn audit_identical_datasets_near_zero() {
        let d = Dataset::new(vec![0.0, 0.5, -0.5], 1, Stage::Normalized).unwrap();
        let mut rng = stream(5, "audit", 0);
        let eps = epsilon_audit(
            |data, rng| data.coords().iter().sum::<f64>() / 3.0 + laplace_sample(0.1, rng),
            &d,
            &d,
            &AuditConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert!(eps < 0.1, "audit on identical data gave {eps}");
    }
}
