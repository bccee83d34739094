use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid control set: {0}")]
    InvalidControlSet(String),

    #[error("control value {value:?} at node {node} is outside the control set")]
    Infeasible { node: usize, value: Vec<f64> },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid probability weights: {0}")]
    InvalidWeights(String),

    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),

    #[error("invalid integrand: {0}")]
    InvalidIntegrand(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state diverged (non-finite value) at time step {step}")]
    Divergence { step: usize },

    #[error("derivative evaluators are not available for this problem")]
    MissingDerivatives,

    #[error("composite running costs have no pointwise Hamiltonian")]
    NotPointwise,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
