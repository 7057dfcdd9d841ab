use std::fmt;

use thiserror::Error;

/// A single violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamViolation {
    NonPositiveParameter { name: &'static str, value: f64 },
    DielectricNotPositive { r: f64, value: f64 },
    DielectricNotFinite { r: f64 },
    InvalidDimension(f64),
    MalformedDielectric(String),
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamViolation::NonPositiveParameter { name, value } => {
                write!(f, "parameter `{name}` must be positive (got {value})")
            }
            ParamViolation::DielectricNotPositive { r, value } => {
                write!(
                    f,
                    "dielectric profile is not positive at r = {r} (g = {value})"
                )
            }
            ParamViolation::DielectricNotFinite { r } => {
                write!(f, "dielectric profile is not finite at r = {r}")
            }
            ParamViolation::InvalidDimension(n) => {
                write!(f, "dimension must be an integer >= 2 (got {n})")
            }
            ParamViolation::MalformedDielectric(msg) => write!(f, "malformed dielectric: {msg}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<ParamViolation>),
    #[error("degenerate mesh spec: {0}")]
    DegenerateSpec(String),
    #[error("mesh would need {nodes} nodes, cap is {cap}")]
    MeshTooLarge { nodes: usize, cap: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite state encountered during assembly")]
    NonFiniteState,
    #[error("newton iteration diverged at eps = {eps} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        eps: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("singular linear system")]
    SingularLinearSystem,
    #[error("radius {r} outside [0, {radius}]")]
    OutOfDomain { r: f64, radius: f64 },
    #[error("A = B: asymptotic expansion is degenerate")]
    EqualConcentrations,
    #[error("malformed expansion query: {0}")]
    MalformedQuery(String),
    #[error("gamma must be positive (got {0})")]
    NonPositiveGamma(f64),
    #[error("kappa must lie in (0, 1) (got {0})")]
    KappaOutOfRange(f64),
    #[error("theta must lie in (0, 2) (got {0})")]
    ThetaOutOfRange(f64),
    #[error("capacitance denominator U(R) - U(r_lo) vanishes")]
    DegenerateDenominator,
    #[error("need at least {needed} data points, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid continuation ladder: {0}")]
    InvalidLadder(String),
}

fn join(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
