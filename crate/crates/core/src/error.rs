use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {0} is outside the domain [0, inf) of a Young function")]
    NegativeArgument(f64),
    #[error("sample list is empty")]
    EmptySamples,
    #[error("sample masses sum to {0}, expected 1")]
    MassNotNormalized(f64),
    #[error("sample value or mass is negative or not finite")]
    InvalidSample,
    #[error("table is not strictly increasing at entry {0}")]
    NonMonotoneTable(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("cube at level {level} is deeper than the grid depth {depth}")]
    CubeTooDeep { level: u32, depth: u32 },
    #[error("cube index out of range for its level")]
    CubeOutOfRange,
    #[error("grids differ in dimension or depth")]
    GridMismatch,
    #[error("grid function has {got} cells, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weight cell {0} is negative or not finite")]
    InvalidWeight(usize),
    #[error("collection is not sparse at fraction {0}")]
    NotSparse(f64),
    #[error("collection does not contain the requested root cube")]
    MissingRoot,
    #[error("epsilon family is not integrable against dt/t")]
    DivergentEpsilon,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
