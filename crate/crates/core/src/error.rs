use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model construction, the solvers and the reporting layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario specification: {0}")]
    InvalidScenario(String),

    #[error("invalid carbon path: {0}")]
    InvalidPath(String),

    #[error("carbon path has zero probability, posterior undefined")]
    ZeroProbabilityPath,

    #[error("time index {requested} is beyond {limit}")]
    TimeOutOfRange { requested: usize, limit: usize },

    #[error("invalid diffusion parameters: {0}")]
    InvalidDiffusion(String),

    #[error("grid step yields n = 0 (range {range} smaller than one volatility step {step})")]
    GridTooCoarse { range: f64, step: f64 },

    #[error("stationary density is degenerate on the grid: {0}")]
    DegenerateDensity(String),

    #[error("invalid market configuration: {0}")]
    InvalidMarket(String),

    #[error("negative demand {demand} GW at t = {t}")]
    NegativeDemand { t: usize, demand: f64 },

    #[error("LP has {vars} variables, above the limit of {limit}")]
    ProblemTooLarge { vars: usize, limit: usize },

    #[error("LP is infeasible")]
    Infeasible,

    #[error("LP is unbounded")]
    Unbounded,

    #[error("LP solver failed: {0}")]
    Solver(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("fictitious play diverged: {0}")]
    Diverged(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
