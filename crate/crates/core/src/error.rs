use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid polyhedron: {0}")]
    InvalidPolyhedron(String),
    #[error("polyhedron is empty")]
    Infeasible,
    #[error("point lies outside the set (violation {violation:e})")]
    OutsideSet { violation: f64 },
    #[error("vector is not in the normal cone (residual {residual:e})")]
    NotInNormalCone { residual: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("invalid scenario: `{key}`: {reason}")]
    InvalidScenario { key: String, reason: String },
    #[error("control {value} violates bound {bound} at interval {interval}, coordinate {coord}")]
    ControlOutsideSet { interval: usize, coord: usize, value: f64, bound: f64 },
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("inconsistent trajectory at interval {interval}: residual {residual:e}")]
    InconsistentTrajectory { interval: usize, residual: f64 },
    #[error("gradient of the gap between agents {i} and {j} is undefined")]
    GradientUndefined { i: usize, j: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn scenario(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidScenario { key: key.to_string(), reason: reason.into() }
    }

    /// True for failures of a numerical method rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::Infeasible | Error::InconsistentTrajectory { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
