//! End-to-end releases: the full-grid mechanism, the accelerated
//! grid-subset variant, synthetic sampling and error diagnostics.
//!
//! Raw data is read in exactly two places: the moment computation, whose
//! output passes through [`privatize_moments`] before anything else sees it,
//! and the private PCA stage of the accelerated mechanism. Everything after
//! those barriers is post-processing.

use std::collections::HashSet;

use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{build_design_matrix, compute_moments, enumerate_basis, BasisSet, DesignMatrix, MomentVector};
use crate::domain::{discretize, ChebGrid, Dataset, Lattice, Stage};
use crate::error::{Error, Result};
use crate::lpsolve::{l1_residual, solve_l1_fit_with, L1Fit, ProbabilityVector, SimplexOptions};
use crate::noise::{moment_noise_scale, privatize_moments, NoiseKind, NoiseSpec};
use crate::params::{
    default_basis_subset, derive_params_approx, derive_params_pure, Accelerated, MechanismParams, Mode,
    PrivacyBudget, StageBudget,
};
use crate::pca::{private_ellipsoid, sample_ellipsoid, uniform_hypercube_subset, PrivateSubspace};
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismOptions {
    /// Cap on the synthetic database size; the schedule's `m` grows quickly.
    pub m_max: Option<u64>,
    /// Largest LP (support plus slack columns) the full mechanism will build.
    pub max_lp_columns: u64,
    /// Doubles the moment noise to cover the `2/n` per-moment sensitivity.
    pub strict_sensitivity: bool,
    /// Retain true moments and matrices for [`error_diagnostics`].
    pub keep_artifacts: bool,
    /// Subspace rank for the private PCA; clamped to `d/2` (at least 1).
    pub psi_rank: usize,
    pub psi_iterations: usize,
    /// Smoothness bound used in the discretization bound.
    pub smoothness_bound: f64,
    /// Constant in the default basis-subset size.
    pub c_tilde: f64,
    pub simplex: SimplexOptions,
}

impl Default for MechanismOptions {
    fn default() -> Self {
        Self {
            m_max: None,
            max_lp_columns: 1_000_000,
            strict_sensitivity: false,
            keep_artifacts: false,
            psi_rank: 1,
            psi_iterations: 2,
            smoothness_bound: 1.0,
            c_tilde: 0.5,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDatabase {
    pub points: Dataset,
    pub params: MechanismParams,
    pub seed: u64,
    pub budget: PrivacyBudget,
    /// `m` from the parameter schedule, before any cap.
    pub m_formula: u64,
}

/// Intermediate values kept for diagnostics. Contains the true moments, so
/// it must never be published.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub basis: BasisSet,
    pub lattice: Lattice,
    pub n_grid: u32,
    pub smoothness_bound: f64,
    pub true_moments: MomentVector,
    pub noisy_moments: MomentVector,
    pub rounded_moments: MomentVector,
    pub design: DesignMatrix,
    pub design_rounded: DesignMatrix,
}

#[derive(Clone, Debug)]
pub struct Release {
    pub database: SyntheticDatabase,
    pub distribution: ProbabilityVector,
    pub lp_objective: f64,
    /// The LP stopped early; the fit is feasible but possibly suboptimal.
    pub lp_degraded: bool,
    pub noise_scale: f64,
    pub basis_count: usize,
    pub subspace: Option<PrivateSubspace>,
    pub artifacts: Option<RunArtifacts>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// `||b_noisy - b||_1`; reads the true moments.
    pub noise_l1: f64,
    pub lp_objective: f64,
    /// `||b_synthetic - W u*||_inf` with the unrounded design matrix.
    pub sampling_linf: f64,
    /// `basis_count / L`.
    pub rounding_bound: f64,
    /// `d B / N`.
    pub discretization_bound: f64,
    /// Always true: the report is computed from the raw moments.
    pub non_private: bool,
}

/// How smooth the target queries are.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Order(u32),
    /// Gaussian-kernel bandwidth; `sigma^2` plays the role of the order.
    GaussianBandwidth(f64),
}

impl Smoothness {
    /// Integer order for the parameter schedule and the real exponent for the
    /// basis-subset size.
    fn orders(self) -> Result<(u32, f64)> {
        match self {
            Smoothness::Order(k) if k >= 1 => Ok((k, k as f64)),
            Smoothness::GaussianBandwidth(s) if s > 0.0 && s.is_finite() => {
                let sq = s * s;
                Ok(((sq.floor() as u32).max(1), sq))
            }
            other => Err(Error::param(format!("invalid smoothness {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSource {
    PcaEllipsoid,
    UniformHypercube,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceleratedConfig {
    pub smoothness: Smoothness,
    /// Number of subset points drawn before snapping and deduplication.
    pub c: u64,
    pub r_override: Option<u64>,
    pub subset: SubsetSource,
}

fn schedule(n: usize, d: usize, k: u32, budget: &PrivacyBudget) -> Result<MechanismParams> {
    match budget.mode() {
        Mode::Pure => derive_params_pure(n, d, k),
        Mode::Approx => derive_params_approx(n, d, k, budget.delta),
    }
}

fn check_input(data: &Dataset) -> Result<()> {
    if data.stage() == Stage::Raw {
        return Err(Error::InvalidDataset("the mechanism expects normalized data".into()));
    }
    if data.len() < 2 {
        return Err(Error::InvalidDataset("need at least 2 records".into()));
    }
    Ok(())
}

/// Full-grid mechanism with smoothness order `k`.
pub fn run_full(
    data: &Dataset,
    k: u32,
    budget: &PrivacyBudget,
    opts: &MechanismOptions,
    seed: u64,
) -> Result<Release> {
    check_input(data)?;
    let (n, d) = (data.len(), data.dim());
    let params = schedule(n, d, k, budget)?;
    let grid = ChebGrid::new(params.n_grid)?;
    let limit = opts.max_lp_columns as u128;
    let support_count = grid.count(d).unwrap_or(u128::MAX);
    let basis_count = params
        .full_basis_count(d)
        .map(u128::from)
        .unwrap_or(u128::MAX);
    let columns = support_count.saturating_add(basis_count.saturating_mul(2));
    if columns > limit {
        return Err(Error::TooLarge { columns, limit });
    }
    let support = grid.full_grid(d)?;
    let basis = enumerate_basis(params.t, d, None)?;
    release(data, basis, support, params, budget.whole(), None, budget, opts, seed)
}

/// Grid-subset mechanism: the basis is truncated to the `R` lowest-degree
/// functions and the LP support is a subset of `C` grid points.
pub fn run_accelerated(
    data: &Dataset,
    cfg: &AcceleratedConfig,
    budget: &PrivacyBudget,
    opts: &MechanismOptions,
    seed: u64,
) -> Result<Release> {
    check_input(data)?;
    if cfg.c == 0 {
        return Err(Error::param("subset size C must be at least 1"));
    }
    let (n, d) = (data.len(), data.dim());
    let mode = budget.mode();
    let (k, sigma_sq) = cfg.smoothness.orders()?;
    let mut params = schedule(n, d, k, budget)?;
    let mut r = match cfg.r_override {
        Some(r) if r >= 1 => r,
        Some(_) => return Err(Error::param("R must be at least 1")),
        None => default_basis_subset(n, d, sigma_sq, mode, opts.c_tilde)?,
    };
    if let Some(full) = params.full_basis_count(d) {
        if r > full {
            warn!("R = {r} exceeds t^d = {full}; using the full basis");
            r = full;
        }
    }
    params.accelerated = Some(Accelerated { c: cfg.c, r });
    let grid = ChebGrid::new(params.n_grid)?;

    let (subset, moment_budget, subspace) = match cfg.subset {
        SubsetSource::PcaEllipsoid => {
            let rank = opts.psi_rank.min(d / 2).max(1);
            let kind = match mode {
                Mode::Pure => NoiseKind::Laplace,
                Mode::Approx => NoiseKind::Gaussian,
            };
            let sub = private_ellipsoid(
                data,
                rank,
                opts.psi_iterations,
                budget.pca_share(),
                kind,
                &mut stream(seed, "psi", 0),
                &mut stream(seed, "private-mean", 0),
            )?;
            let s = sample_ellipsoid(&sub, cfg.c as usize, &mut stream(seed, "subset", 0))?;
            (s.points, budget.moment_share(), Some(sub))
        }
        SubsetSource::UniformHypercube => {
            let s = uniform_hypercube_subset(&grid, d, cfg.c as usize, &mut stream(seed, "subset", 0))?;
            (s.points, budget.whole(), None)
        }
    };
    let center = subspace.as_ref().map_or_else(|| vec![0.0; d], |s| s.center.clone());
    let support = order_by_distance(&snap_and_dedup(&subset, &grid)?, &center)?;
    info!(
        "accelerated support: {} distinct grid points from C = {}, R = {r}",
        support.len(),
        cfg.c
    );
    let basis = enumerate_basis(params.t, d, Some(r))?;
    release(data, basis, support, params, moment_budget, subspace, budget, opts, seed)
}

/// Snaps every coordinate to the grid and drops repeated points, keeping the
/// first occurrence.
pub fn snap_and_dedup(points: &Dataset, grid: &ChebGrid) -> Result<Dataset> {
    let d = points.dim();
    let snapped = discretize(points, grid)?;
    let mut seen = HashSet::new();
    let mut coords = Vec::with_capacity(snapped.coords().len());
    for p in snapped.points() {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            coords.extend_from_slice(p);
        }
    }
    Dataset::new(coords, d, Stage::Discretized)
}

/// Stable sort by distance to `center`. The LP solver breaks ties by column
/// index, so among equally good fits the more central points win.
pub fn order_by_distance(points: &Dataset, center: &[f64]) -> Result<Dataset> {
    let dist = |p: &[f64]| -> f64 { p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum() };
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| dist(points.point(a)).total_cmp(&dist(points.point(b))));
    let coords = idx.iter().flat_map(|&i| points.point(i).iter().copied()).collect();
    Dataset::new(coords, points.dim(), points.stage())
}

#[allow(clippy::too_many_arguments)]
fn release(
    data: &Dataset,
    basis: BasisSet,
    support: Dataset,
    params: MechanismParams,
    moment_budget: StageBudget,
    subspace: Option<PrivateSubspace>,
    budget: &PrivacyBudget,
    opts: &MechanismOptions,
    seed: u64,
) -> Result<Release> {
    let grid = ChebGrid::new(params.n_grid)?;
    let lattice = Lattice::new(params.l)?;
    let discrete = discretize(data, &grid)?;

    let true_moments = compute_moments(&discrete, &basis)?;
    let noise_scale = moment_noise_scale(
        params.mode,
        basis.len() as u64,
        data.len(),
        moment_budget.epsilon,
        moment_budget.delta,
        opts.strict_sensitivity,
    )?;
    let spec = NoiseSpec::new(NoiseKind::Laplace, noise_scale, "moment-noise")?;
    let noisy = privatize_moments(&true_moments, &spec, &mut stream(seed, &spec.stream, 0));
    let rounded = noisy.rounded(&lattice);

    let design = build_design_matrix(&basis, &support)?;
    let design_rounded = design.rounded(&lattice);
    let fit = match solve_l1_fit_with(&design_rounded, &rounded, &support, &opts.simplex) {
        Ok(fit) => fit,
        Err(Error::LpIterationLimit { iterations, best }) => {
            warn!("LP stopped after {iterations} iterations; continuing with a degraded fit");
            *best
        }
        Err(e) => return Err(e),
    };
    let L1Fit {
        distribution,
        objective,
        degraded,
        ..
    } = fit;

    let m_formula = params.m;
    let m = opts.m_max.map_or(m_formula, |cap| cap.min(m_formula));
    let points = sample_synthetic(&distribution, m as usize, &mut stream(seed, "sampling", 0))?;

    let artifacts = opts.keep_artifacts.then(|| RunArtifacts {
        basis: basis.clone(),
        lattice,
        n_grid: params.n_grid,
        smoothness_bound: opts.smoothness_bound,
        true_moments,
        noisy_moments: noisy,
        rounded_moments: rounded,
        design,
        design_rounded,
    });
    Ok(Release {
        database: SyntheticDatabase {
            points,
            params,
            seed,
            budget: *budget,
            m_formula,
        },
        distribution,
        lp_objective: objective,
        lp_degraded: degraded,
        noise_scale,
        basis_count: basis.len(),
        subspace,
        artifacts,
    })
}

/// `m` independent draws from `u`. Only the distribution reaches this
/// function, never the data.
pub fn sample_synthetic<R: Rng + ?Sized>(u: &ProbabilityVector, m: usize, rng: &mut R) -> Result<Dataset> {
    let support = u.support();
    let d = support.dim();
    let mut cdf = Vec::with_capacity(u.weights().len());
    let mut acc = 0.0;
    for &w in u.weights() {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let mut coords = Vec::with_capacity(m * d);
    for _ in 0..m {
        let x = rng.random::<f64>() * total;
        // first index whose cumulative weight exceeds x, skipping zero weights
        let mut i = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
        while u.weights()[i] == 0.0 && i > 0 {
            i -= 1;
        }
        coords.extend_from_slice(support.point(i));
    }
    Dataset::new(coords, d, support.stage())
}

/// Error decomposition for a release made with `keep_artifacts`.
pub fn error_diagnostics(release: &Release) -> Result<DiagnosticsReport> {
    let art = release.artifacts.as_ref().ok_or(Error::MissingArtifacts)?;
    let noise_l1 = art
        .noisy_moments
        .values
        .iter()
        .zip(&art.true_moments.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    let synth = &release.database.points;
    let sampling_linf = if synth.is_empty() {
        0.0
    } else {
        let b_synth = compute_moments(synth, &art.basis)?;
        let wu = art.design.apply(release.distribution.weights());
        b_synth
            .values
            .iter()
            .zip(&wu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let d = synth.dim() as f64;
    Ok(DiagnosticsReport {
        noise_l1,
        lp_objective: release.lp_objective,
        sampling_linf,
        rounding_bound: art.basis.len() as f64 / art.lattice.size() as f64,
        discretization_bound: d * art.smoothness_bound / art.n_grid as f64,
        non_private: true,
    })
}

/// LP objective of the release against the rounded moments, recomputed from
/// the artifacts.
pub fn recomputed_objective(release: &Release) -> Result<f64> {
    let art = release.artifacts.as_ref().ok_or(Error::MissingArtifacts)?;
    Ok(l1_residual(
        &art.design_rounded,
        release.distribution.weights(),
        &art.rounded_moments.values,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::cheb_eval;

    fn grid_data(n: usize, seed: u64) -> Dataset {
        let grid = ChebGrid::new(16).unwrap();
        let mut rng = stream(seed, "test-data", 0);
        let coords = (0..n).map(|_| grid.value(rng.random_range(0..16))).collect();
        Dataset::new(coords, 1, Stage::Normalized).unwrap()
    }

    fn keep() -> MechanismOptions {
        MechanismOptions {
            keep_artifacts: true,
            ..MechanismOptions::default()
        }
    }

    #[test]
    fn noiseless_full_run_recovers_moments() {
        let data = grid_data(256, 1);
        let budget = PrivacyBudget::pure(1e6).unwrap();
        let rel = run_full(&data, 2, &budget, &keep(), 9).unwrap();
        let p = rel.database.params;
        assert_eq!((p.t, p.n_grid, p.m, p.l), (4, 16, 16384, 64));
        assert_eq!(rel.database.points.len(), 16384);
        let diag = error_diagnostics(&rel).unwrap();
        assert!(diag.noise_l1 < 1e-4);
        assert!(diag.lp_objective <= 4.0 / 64.0 + 1e-9);
        let art = rel.artifacts.as_ref().unwrap();
        let synth = compute_moments(&rel.database.points, &art.basis).unwrap();
        for (a, b) in synth.values.iter().zip(&art.true_moments.values) {
            assert!((a - b).abs() <= 2.0 * 4.0 / 64.0 + 3.0 / 128.0);
        }
        assert!((recomputed_objective(&rel).unwrap() - rel.lp_objective).abs() < 1e-12);
    }

    #[test]
    fn point_mass_concentrates() {
        let grid = ChebGrid::new(16).unwrap();
        let x = grid.value(11);
        let data = Dataset::new(vec![x; 256], 1, Stage::Normalized).unwrap();
        let budget = PrivacyBudget::pure(1e6).unwrap();
        let rel = run_full(&data, 2, &budget, &MechanismOptions::default(), 3).unwrap();
        let support = rel.distribution.support();
        let mass: f64 = support
            .points()
            .zip(rel.distribution.weights())
            .filter(|(p, _)| p[0] == x)
            .map(|(_, w)| w)
            .sum();
        // the rounded moments pin the point down up to lattice slack
        assert!(mass >= 0.9, "mass {mass}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = grid_data(32, 2);
        assert!(PrivacyBudget::pure(0.0).is_err());
        let raw = Dataset::new(vec![5.0, 6.0], 1, Stage::Raw).unwrap();
        let b = PrivacyBudget::pure(1.0).unwrap();
        assert!(run_full(&raw, 2, &b, &MechanismOptions::default(), 0).is_err());
        let tight = MechanismOptions {
            max_lp_columns: 10,
            ..MechanismOptions::default()
        };
        assert!(matches!(run_full(&data, 2, &b, &tight, 0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = grid_data(128, 4);
        let b = PrivacyBudget::pure(1.0).unwrap();
        let o = MechanismOptions::default();
        let a = run_full(&data, 2, &b, &o, 5).unwrap();
        let c = run_full(&data, 2, &b, &o, 5).unwrap();
        assert_eq!(a.database, c.database);
    }

    #[test]
    fn sampler_examples() {
        let support = Dataset::new(vec![-0.5, 0.5], 1, Stage::Discretized).unwrap();
        let mut rng = stream(1, "test", 0);
        let mass = ProbabilityVector::point_mass(support.clone(), 1).unwrap();
        let s = sample_synthetic(&mass, 100, &mut rng).unwrap();
        assert!(s.coords().iter().all(|&v| v == 0.5));
        let half = ProbabilityVector::new(support.clone(), vec![0.5, 0.5]).unwrap();
        let s = sample_synthetic(&half, 100_000, &mut rng).unwrap();
        let f = s.coords().iter().filter(|&&v| v == 0.5).count() as f64 / 1e5;
        assert!((f - 0.5).abs() < 0.01);
        assert!(sample_synthetic(&half, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn accelerated_runs_both_subsets() {
        let mut rng = stream(6, "test-data", 0);
        let pts: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let s: f64 = rng.random_range(-0.8..0.8);
                vec![s, -s, 0.5 * s, rng.random_range(-0.1..0.1)]
            })
            .collect();
        let data = Dataset::from_points(&pts, Stage::Normalized).unwrap();
        let budget = PrivacyBudget::pure(1.0).unwrap();
        let opts = MechanismOptions {
            m_max: Some(500),
            keep_artifacts: true,
            ..MechanismOptions::default()
        };
        for subset in [SubsetSource::PcaEllipsoid, SubsetSource::UniformHypercube] {
            let cfg = AcceleratedConfig {
                smoothness: Smoothness::GaussianBandwidth(2.0),
                c: 300,
                r_override: None,
                subset,
            };
            let rel = run_accelerated(&data, &cfg, &budget, &opts, 11).unwrap();
            let acc = rel.database.params.accelerated.unwrap();
            assert_eq!(rel.basis_count as u64, acc.r);
            assert_eq!(rel.database.points.len(), 500);
            assert_eq!(rel.subspace.is_some(), subset == SubsetSource::PcaEllipsoid);
            let support = rel.distribution.support();
            let grid = ChebGrid::new(rel.database.params.n_grid).unwrap();
            assert!(support.coords().iter().all(|&v| grid.contains(v)));
            let diag = error_diagnostics(&rel).unwrap();
            assert!(diag.sampling_linf >= 0.0 && diag.noise_l1 >= 0.0);
        }
    }

    #[test]
    fn basis_moment_of_synthetic_matches_weights() {
        let support = Dataset::new(vec![-0.5, 0.25], 1, Stage::Discretized).unwrap();
        let u = ProbabilityVector::new(support, vec![0.25, 0.75]).unwrap();
        let s = sample_synthetic(&u, 40_000, &mut stream(2, "test", 0)).unwrap();
        let r = crate::basis::MultiIndex(vec![1]);
        let m: f64 = s.points().map(|p| cheb_eval(&r, p)).sum::<f64>() / 40_000.0;
        assert!((m - (0.25 * -0.5 + 0.75 * 0.25)).abs() < 0.01);
    }

    #[test]
    fn diagnostics_need_artifacts() {
        let data = grid_data(64, 3);
        let b = PrivacyBudget::pure(1.0).unwrap();
        let rel = run_full(&data, 2, &b, &MechanismOptions::default(), 1).unwrap();
        assert!(matches!(error_diagnostics(&rel), Err(Error::MissingArtifacts)));
    }
}
