use std::path::PathBuf;

use thiserror::Error;

use crate::lpsolve::L1Fit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("value {value} is not on the lattice with L = {lattice}")]
    OffLattice { value: f64, lattice: u32 },

    #[error(
        "problem too large for the full mechanism: {columns} LP columns exceeds the limit of {limit}; use run_accelerated"
    )]
    TooLarge { columns: u128, limit: u128 },

    #[error("LP solver hit the iteration limit after {iterations} iterations (degraded result attached)")]
    LpIterationLimit { iterations: usize, best: Box<L1Fit> },

    #[error("LP is infeasible")]
    LpInfeasible,

    #[error("LP is unbounded")]
    LpUnbounded,

    #[error("diagnostics require retained run artifacts")]
    MissingArtifacts,

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
