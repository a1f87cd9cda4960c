//! Private subspace iteration, private centering and the grid subsets used by
//! the accelerated mechanism.

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ChebGrid, Dataset, Stage};
use crate::error::{Error, Result};
use crate::noise::{gaussian_sample, laplace_sample, NoiseKind};
use crate::params::StageBudget;

/// Floor on estimated eigenvalues so that no ellipsoid axis collapses.
pub const LAMBDA_MIN: f64 = 1e-6;

/// Share of the PCA budget spent on the subspace; the rest goes to the mean.
pub const PSI_SHARE: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    a: DMatrix<f64>,
    n: usize,
}

impl CovarianceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Spectral-norm bound `5d/n` on the change caused by replacing one
    /// record.
    pub fn sensitivity(&self) -> f64 {
        5.0 * self.dim() as f64 / self.n as f64
    }
}

/// Centered covariance `(1/n) sum (x - mean)(x - mean)'`.
pub fn covariance(data: &Dataset) -> Result<CovarianceMatrix> {
    let n = data.len();
    if n < 2 {
        return Err(Error::param(format!("covariance needs at least 2 records, got {n}")));
    }
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for p in data.points() {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut a = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for p in data.points() {
        for (c, (x, m)) in centered.iter_mut().zip(p.iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..d {
            for j in i..d {
                a[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = a[(i, j)] / n as f64;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(CovarianceMatrix { a, n })
}

/// Result of orthonormalization: the orthonormal matrix and the indices of
/// columns that were numerically dependent and had to be redrawn.
#[derive(Clone, Debug)]
pub struct Orthonormalized {
    pub q: DMatrix<f64>,
    pub resampled: Vec<usize>,
}

/// Modified Gram-Schmidt, run twice for stability. A column whose residual
/// is tiny relative to its original norm is replaced by a fresh standard
/// normal draw and flagged.
pub fn gram_schmidt<R: Rng + ?Sized>(m: &DMatrix<f64>, rng: &mut R) -> Result<Orthonormalized> {
    let (d, k) = m.shape();
    if k > d {
        return Err(Error::param(format!("cannot orthonormalize {k} columns in dimension {d}")));
    }
    let mut q = m.clone();
    let mut resampled = Vec::new();
    for j in 0..k {
        let original = q.column(j).norm();
        let mut attempts = 0;
        loop {
            let mut v = q.column(j).clone_owned();
            for _ in 0..2 {
                for i in 0..j {
                    let qi = q.column(i);
                    let proj = qi.dot(&v);
                    v.axpy(-proj, &qi, 1.0);
                }
            }
            let norm = v.norm();
            if norm.is_finite() && norm > 1e-10 * original && norm > 1e-300 {
                q.set_column(j, &(v / norm));
                break;
            }
            attempts += 1;
            if attempts > 100 {
                return Err(Error::param("could not complete an orthonormal basis"));
            }
            if resampled.last() != Some(&j) {
                resampled.push(j);
            }
            for i in 0..d {
                q[(i, j)] = gaussian_sample(1.0, rng);
            }
        }
    }
    Ok(Orthonormalized { q, resampled })
}

/// Per-entry noise level of the subspace iteration.
///
/// Gaussian: `5d sqrt(4 k L ln(1/delta)) / (n epsilon)`.
/// Laplace: `50 d^{3/2} k L / (n epsilon)`.
pub fn psi_noise_sigma(
    kind: NoiseKind,
    d: usize,
    k: usize,
    iterations: usize,
    n: usize,
    epsilon: f64,
    delta: f64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let (d, k, l, ne) = (d as f64, k as f64, iterations as f64, n as f64 * epsilon);
    match kind {
        NoiseKind::Gaussian => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::param("Gaussian subspace noise needs delta in (0, 1)"));
            }
            Ok(5.0 * d * (4.0 * k * l * (1.0 / delta).ln()).sqrt() / ne)
        }
        NoiseKind::Laplace => Ok(50.0 * d.powf(1.5) * k * l / ne),
    }
}

/// Raw output of the iteration before eigenvalue estimation.
#[derive(Clone, Debug)]
pub struct PsiTrace {
    pub x: DMatrix<f64>,
    /// The last noisy iterate, before orthonormalization.
    pub last_w: DMatrix<f64>,
    pub resampled: usize,
}

/// Noisy power iteration `W = A X + ||X||_max G`, `X = GS(W)`, with noise
/// entries of level `sigma`. `sigma = 0` gives plain subspace iteration.
pub fn psi_with_sigma<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    k: usize,
    iterations: usize,
    sigma: f64,
    kind: NoiseKind,
    rng: &mut R,
) -> Result<PsiTrace> {
    let d = a.nrows();
    if k == 0 || k > d {
        return Err(Error::param(format!("rank k = {k} must lie in 1..={d}")));
    }
    if iterations == 0 {
        return Err(Error::param("at least one iteration is required"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("noise level must be nonnegative"));
    }
    let start = DMatrix::from_fn(d, k, |_, _| gaussian_sample(1.0, rng));
    let first = gram_schmidt(&start, rng)?;
    let mut x = first.q;
    let mut resampled = first.resampled.len();
    let mut last_w = x.clone();
    for _ in 0..iterations {
        let scale = x.amax();
        let mut w = a * &x;
        if sigma > 0.0 {
            for v in w.iter_mut() {
                let g = match kind {
                    NoiseKind::Gaussian => gaussian_sample(sigma, rng),
                    NoiseKind::Laplace => laplace_sample(sigma, rng),
                };
                *v += scale * g;
            }
        }
        let next = gram_schmidt(&w, rng)?;
        resampled += next.resampled.len();
        x = next.q;
        last_w = w;
    }
    Ok(PsiTrace { x, last_w, resampled })
}

/// Eigenvalue estimates as column norms of the final noisy iterate. This only
/// post-processes private quantities.
pub fn estimate_eigenvalues(last_w: &DMatrix<f64>) -> Vec<f64> {
    last_w.column_iter().map(|c| c.norm()).collect()
}

/// `sqrt(x' A^2 x) = ||A x||` per column. Reads the raw covariance, so it is
/// not private; meant for testing.
pub fn estimate_eigenvalues_exact(x: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
    (a * x).column_iter().map(|c| c.norm()).collect()
}

/// `sin` of the angle between two vectors.
pub fn sin_theta(u: &[f64], x: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c = (dot / (nu * nx)).abs().min(1.0);
    (1.0 - c * c).max(0.0).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateSubspace {
    /// `d x k`, orthonormal columns, stored column-major.
    pub axes: Vec<Vec<f64>>,
    /// Nonincreasing, aligned with `axes`.
    pub lambda_hat: Vec<f64>,
    pub center: Vec<f64>,
    pub noise_kind: NoiseKind,
    pub resampled: usize,
}

impl PrivateSubspace {
    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Private top-`k` subspace of the data covariance, centered at the origin.
/// Spends all of `budget`.
pub fn psi<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    iterations: usize,
    budget: StageBudget,
    kind: NoiseKind,
    rng: &mut R,
) -> Result<PrivateSubspace> {
    let cov = covariance(data)?;
    let d = cov.dim();
    if 2 * k > d {
        warn!("subspace rank {k} exceeds d/2 = {}; accuracy guarantees do not apply", d / 2);
    }
    let sigma = psi_noise_sigma(kind, d, k, iterations, data.len(), budget.epsilon, budget.delta)?;
    let trace = psi_with_sigma(cov.matrix(), k, iterations, sigma, kind, rng)?;
    if trace.resampled > 0 {
        warn!("{} subspace columns were redrawn during orthonormalization", trace.resampled);
    }
    let lambda = estimate_eigenvalues(&trace.last_w);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]));
    Ok(PrivateSubspace {
        axes: order
            .iter()
            .map(|&j| trace.x.column(j).iter().copied().collect())
            .collect(),
        lambda_hat: order.iter().map(|&j| lambda[j]).collect(),
        center: vec![0.0; d],
        noise_kind: kind,
        resampled: trace.resampled,
    })
}

/// Per-coordinate mean plus `Laplace(2d / (n epsilon))`, clamped to the cube.
pub fn private_mean<R: Rng + ?Sized>(data: &Dataset, epsilon: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n, d) = (data.len() as f64, data.dim());
    let scale = private_mean_scale(d, data.len(), epsilon);
    let mut mean = vec![0.0; d];
    for p in data.points() {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x);
    }
    Ok(mean
        .into_iter()
        .map(|m| (m / n + laplace_sample(scale, rng)).clamp(-1.0, 1.0))
        .collect())
}

pub fn private_mean_scale(d: usize, n: usize, epsilon: f64) -> f64 {
    2.0 * d as f64 / (n as f64 * epsilon)
}

/// The full private ellipsoid: subspace from [`psi`] on `PSI_SHARE` of the
/// budget and center from [`private_mean`] on the rest.
pub fn private_ellipsoid<R: Rng + ?Sized, S: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    iterations: usize,
    budget: StageBudget,
    kind: NoiseKind,
    psi_rng: &mut R,
    mean_rng: &mut S,
) -> Result<PrivateSubspace> {
    let mut sub = psi(data, k, iterations, budget.scaled(PSI_SHARE), kind, psi_rng)?;
    sub.center = private_mean(data, budget.epsilon * (1.0 - PSI_SHARE), mean_rng)?;
    Ok(sub)
}

/// Candidate support points for the accelerated LP.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidSubset {
    /// Points inside `[-1, 1]^d`.
    pub points: Dataset,
    /// The same points before clipping to the cube.
    pub unclipped: Vec<f64>,
}

/// `c` points drawn uniformly from the solid ellipsoid with axes `x_s`,
/// radii `sqrt(max(lambda_s, LAMBDA_MIN))` and the subspace's center, then
/// clipped to the cube.
pub fn sample_ellipsoid<R: Rng + ?Sized>(
    sub: &PrivateSubspace,
    c: usize,
    rng: &mut R,
) -> Result<EllipsoidSubset> {
    if c == 0 {
        return Err(Error::param("subset size C must be at least 1"));
    }
    let (d, k) = (sub.dim(), sub.rank());
    if k == 0 || sub.axes.iter().any(|a| a.len() != d) || sub.lambda_hat.len() != k {
        return Err(Error::param("malformed subspace"));
    }
    let radii: Vec<f64> = sub.lambda_hat.iter().map(|&l| l.max(LAMBDA_MIN).sqrt()).collect();
    let mut unclipped = Vec::with_capacity(c * d);
    let mut z = vec![0.0; k];
    for _ in 0..c {
        unit_ball(&mut z, rng);
        let mut p = sub.center.clone();
        for s in 0..k {
            let coef = radii[s] * z[s];
            p.iter_mut().zip(&sub.axes[s]).for_each(|(x, a)| *x += coef * a);
        }
        unclipped.extend(p);
    }
    let clipped = unclipped.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    Ok(EllipsoidSubset {
        points: Dataset::new(clipped, d, Stage::Normalized)?,
        unclipped,
    })
}

// Uniform draw from the unit ball: a normalized Gaussian direction scaled by
// U^(1/k).
fn unit_ball<R: Rng + ?Sized>(z: &mut [f64], rng: &mut R) {
    let k = z.len();
    loop {
        z.iter_mut().for_each(|v| *v = gaussian_sample(1.0, rng));
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = rng.random::<f64>().powf(1.0 / k as f64);
            z.iter_mut().for_each(|v| *v *= r / norm);
            return;
        }
    }
}

/// `c` independent uniform draws, with replacement, from the `N^d` grid.
pub fn uniform_hypercube_subset<R: Rng + ?Sized>(
    grid: &ChebGrid,
    d: usize,
    c: usize,
    rng: &mut R,
) -> Result<EllipsoidSubset> {
    if c == 0 || d == 0 {
        return Err(Error::param("subset size and dimension must be positive"));
    }
    let n = grid.resolution();
    let coords: Vec<f64> = (0..c * d).map(|_| grid.value(rng.random_range(0..n))).collect();
    Ok(EllipsoidSubset {
        points: Dataset::new(coords.clone(), d, Stage::Normalized)?,
        unclipped: coords,
    })
}

/// Ellipsoid membership value `sum_s ((p - center) . x_s)^2 / max(lambda_s,
/// LAMBDA_MIN)`; at most 1 for points of the solid ellipsoid.
pub fn ellipsoid_norm(sub: &PrivateSubspace, p: &[f64]) -> f64 {
    sub.axes
        .iter()
        .zip(&sub.lambda_hat)
        .map(|(axis, &l)| {
            let proj: f64 = p
                .iter()
                .zip(&sub.center)
                .zip(axis)
                .map(|((x, c), a)| (x - c) * a)
                .sum();
            proj * proj / l.max(LAMBDA_MIN)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn ds(points: &[Vec<f64>]) -> Dataset {
        Dataset::from_points(points, Stage::Normalized).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let a = covariance(&ds(&[vec![1.0, 0.0], vec![-1.0, 0.0]])).unwrap();
        assert_eq!(a.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!((a.sensitivity() - 5.0).abs() < 1e-15);
        let same = covariance(&ds(&vec![vec![0.3, -0.2]; 10])).unwrap();
        assert!(same.matrix().amax() < 1e-15);
        assert!(covariance(&ds(&[vec![0.1]])).is_err());
    }

    #[test]
    fn covariance_swap_within_sensitivity() {
        let mut rng = stream(1, "test", 0);
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
            .collect();
        let mut other = pts.clone();
        other[17] = vec![1.0, -1.0];
        let a = covariance(&ds(&pts)).unwrap();
        let b = covariance(&ds(&other)).unwrap();
        let diff = a.matrix() - b.matrix();
        let spectral = diff.symmetric_eigenvalues().amax();
        assert!(spectral <= a.sensitivity());
        assert!((a.sensitivity() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_examples() {
        let mut rng = stream(2, "test", 0);
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(gram_schmidt(&id, &mut rng).unwrap().q, id);
        let q = gram_schmidt(&DMatrix::from_column_slice(2, 1, &[1.0, 1.0]), &mut rng)
            .unwrap()
            .q;
        let h = 0.5f64.sqrt();
        assert!((q[(0, 0)] - h).abs() < 1e-15 && (q[(1, 0)] - h).abs() < 1e-15);
        let dup = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let out = gram_schmidt(&dup, &mut rng).unwrap();
        assert_eq!(out.resampled, vec![1]);
        let gram = out.q.transpose() * &out.q;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn noise_sigma_examples() {
        let g = psi_noise_sigma(NoiseKind::Gaussian, 2, 1, 4, 1000, 1.0, (-1.0f64).exp()).unwrap();
        assert!((g - 0.04).abs() < 1e-15);
        let l = psi_noise_sigma(NoiseKind::Laplace, 4, 2, 5, 100_000, 1.0, 0.0).unwrap();
        assert!((l - 0.04).abs() < 1e-15);
        assert!(psi_noise_sigma(NoiseKind::Gaussian, 2, 1, 4, 1000, 1.0, 0.0).is_err());
        assert!(psi_noise_sigma(NoiseKind::Laplace, 2, 1, 4, 1000, 0.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_iteration_finds_top_eigenvector() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, 0.1, 0.01]));
        let mut rng = stream(3, "test", 0);
        let t = psi_with_sigma(&a, 1, 100, 0.0, NoiseKind::Laplace, &mut rng).unwrap();
        let x: Vec<f64> = t.x.column(0).iter().copied().collect();
        assert!(sin_theta(&[1.0, 0.0, 0.0, 0.0], &x) <= 1e-6);
        let est = estimate_eigenvalues(&(&a * &t.x));
        assert!((est[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn exact_eigenvalue_examples() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(estimate_eigenvalues_exact(&e1, &a), vec![4.0]);
        let h = 0.5f64.sqrt();
        let diag = DMatrix::from_column_slice(2, 1, &[h, h]);
        assert!((estimate_eigenvalues_exact(&diag, &a)[0] - 8.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn psi_output_is_orthonormal_and_sorted() {
        let mut rng = stream(4, "test", 0);
        let pts: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let s: f64 = rng.random_range(-1.0..=1.0);
                vec![s, 0.5 * s, rng.random_range(-0.1..=0.1), 0.0]
            })
            .collect();
        let budget = StageBudget { epsilon: 1.0, delta: 0.0 };
        let sub = psi(&ds(&pts), 2, 3, budget, NoiseKind::Laplace, &mut rng).unwrap();
        assert!(sub.lambda_hat.windows(2).all(|w| w[0] >= w[1]));
        let dot: f64 = sub.axes[0].iter().zip(&sub.axes[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9);
        for a in &sub.axes {
            assert!((a.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn private_mean_scale_and_clamp() {
        assert!((private_mean_scale(2, 100, 1.0) - 0.04).abs() < 1e-15);
        let data = ds(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        let mut rng = stream(5, "test", 0);
        for _ in 0..50 {
            let m = private_mean(&data, 0.1, &mut rng).unwrap();
            assert!(m.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        let sym = ds(&[vec![0.5, -0.25], vec![-0.5, 0.25]]);
        let m = private_mean(&sym, 1e9, &mut rng).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-6));
    }

    fn line_subspace() -> PrivateSubspace {
        PrivateSubspace {
            axes: vec![vec![1.0, 0.0]],
            lambda_hat: vec![1.0],
            center: vec![0.0, 0.0],
            noise_kind: NoiseKind::Laplace,
            resampled: 0,
        }
    }

    #[test]
    fn ellipsoid_rank_one_is_a_segment() {
        let mut rng = stream(6, "test", 0);
        let s = sample_ellipsoid(&line_subspace(), 1000, &mut rng).unwrap();
        for p in s.unclipped.chunks(2) {
            assert!(p[0].abs() <= 1.0 && p[1] == 0.0);
        }
    }

    #[test]
    fn ellipsoid_membership_and_mean() {
        let h = 0.5f64.sqrt();
        let sub = PrivateSubspace {
            axes: vec![vec![h, h, 0.0], vec![-h, h, 0.0]],
            lambda_hat: vec![0.5, 0.02],
            center: vec![0.1, -0.2, 0.3],
            noise_kind: NoiseKind::Gaussian,
            resampled: 0,
        };
        let mut rng = stream(7, "test", 0);
        let s = sample_ellipsoid(&sub, 100_000, &mut rng).unwrap();
        let mut mean = [0.0; 3];
        for p in s.unclipped.chunks(3) {
            assert!(ellipsoid_norm(&sub, p) <= 1.0 + 1e-9);
            mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / 100_000.0);
        }
        let tol = 3.0 * 0.5f64.sqrt() / 100_000f64.sqrt();
        for (m, c) in mean.iter().zip(&sub.center) {
            assert!((m - c).abs() <= tol);
        }
        assert!(s.points.coords().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn hypercube_subset() {
        let mut rng = stream(8, "test", 0);
        let one = uniform_hypercube_subset(&ChebGrid::new(1).unwrap(), 3, 10, &mut rng).unwrap();
        assert!(one.points.coords().iter().all(|&v| v == 0.0));
        let grid = ChebGrid::new(7).unwrap();
        let s = uniform_hypercube_subset(&grid, 2, 100_000, &mut rng).unwrap();
        assert!(s.points.coords().iter().all(|&v| grid.contains(v)));
        for axis in 0..2 {
            let m: f64 = s.points.points().map(|p| p[axis]).sum::<f64>() / 100_000.0;
            assert!(m.abs() < 0.02);
        }
    }
}
