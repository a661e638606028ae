use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dimensional infeasibility: {users} users need more than {antennas} transmit antennas")]
    DimensionalInfeasibility { users: usize, antennas: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("rank violation: eigenvalue ratio {ratio:.3e} exceeds tolerance (spectrum {spectrum:?})")]
    RankViolation { ratio: f64, spectrum: Vec<f64> },
    #[error("ill-conditioned matrix: {0}")]
    IllConditioned(String),
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
    #[error("solver did not reach optimality: {0}")]
    Solver(String),
    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
