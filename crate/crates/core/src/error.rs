use alloc::string::String;

/// Errors raised by construction, assembly and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {requested:e} (best estimate {estimate}, achieved {achieved:e})")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("unknown potential family `{0}`")]
    UnknownFamily(String),

    #[error("matrix is not hermitian (defect {defect:e} exceeds {tolerance:e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("backend mismatch: {0}")]
    Backend(String),

    #[error("grid too coarse: plaquette flux h₁h₂·sup|B| = {value} exceeds 1, link phases alias")]
    PhaseAliasing { value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("memory budget exceeded: {required} entries requested, budget {budget}")]
    MemoryBudget { required: usize, budget: usize },

    #[error("dense solver threshold exceeded: dimension {dim} > {threshold}")]
    DenseThreshold { dim: usize, threshold: usize },

    #[error("near-singular shift: pivot {pivot:e} at Ritz value {ritz}")]
    NearSingular { pivot: f64, ritz: f64 },

    #[error("iterative solve stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("block decomposition residual {0:e} exceeds tolerance")]
    BlockResidual(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("sampling budget exceeded: {required} samples > {budget}")]
    SamplingBudget { required: usize, budget: usize },

    #[error("missing derivative rule for long-range test")]
    MissingDerivative,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
