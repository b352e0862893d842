use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("grid too small: axis {axis} has {nodes} nodes, need at least {required}")]
    GridTooSmall { axis: usize, nodes: usize, required: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unit vector has norm {norm}, expected 1")]
    BadUnitVector { norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target grid not covered by source preimage: {uncovered_fraction:.4} uncovered")]
    Coverage { uncovered_fraction: f64 },

    #[error("quadrature budget exceeded: {required} evaluations requested, budget {budget}")]
    QuadratureBudgetExceeded { required: u64, budget: u64 },

    #[error("finite-difference step {delta:e} below noise floor {floor:e}")]
    StepTooSmall { delta: f64, floor: f64 },

    #[error("iteration diverged at step {iteration}: magnitude {magnitude:e} exceeds {bound:e}")]
    Divergence {
        iteration: usize,
        magnitude: f64,
        bound: f64,
    },

    #[error("CFL violation: dtau/h = {ratio} exceeds {bound}")]
    CflViolation { ratio: f64, bound: f64 },

    #[error("region outside grid: {0}")]
    RegionOutsideGrid(String),

    #[error("field file: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
