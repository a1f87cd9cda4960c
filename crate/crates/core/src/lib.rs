//! Differentially private synthetic databases that stay accurate for every
//! smooth query.
//!
//! The release pipeline discretizes the data onto a Chebyshev grid, computes
//! tensor-product Chebyshev moments, perturbs them with calibrated Laplace
//! noise, fits a distribution over grid points by L1 linear programming and
//! finally samples a synthetic database from that distribution. An
//! accelerated variant restricts the fit to a small set of grid points drawn
//! from a privately estimated principal ellipsoid.
//!
//! ```no_run
//! use synthdb::{mechanism, Dataset, PrivacyBudget, Stage};
//!
//! let data = Dataset::new(vec![0.1, -0.4, 0.7, 0.2], 1, Stage::Normalized).unwrap();
//! let budget = PrivacyBudget::pure(1.0).unwrap();
//! let opts = mechanism::MechanismOptions::default();
//! let release = mechanism::run_full(&data, 2, &budget, &opts, 7).unwrap();
//! println!("{} synthetic points", release.database.points.len());
//! ```

pub mod basis;
pub mod domain;
pub mod error;
pub mod harness;
pub mod lpsolve;
pub mod mechanism;
pub mod noise;
pub mod params;
pub mod pca;
pub mod queries;
pub mod rng;

pub use domain::{discretize, normalize_dataset, ChebGrid, Dataset, Lattice, Stage};
pub use error::{Error, Result};
pub use params::{derive_params_approx, derive_params_pure, MechanismParams, Mode, PrivacyBudget};
