//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Everything that can go wrong while building meshes, assembling or solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The interface of the requested geometry does not lie on grid lines at
    /// this subdivision count.
    #[error("interface cannot be aligned with the grid: {0}")]
    Alignment(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    /// Exact-solution data requested from a problem that has none.
    #[error("problem carries no exact solution")]
    MissingExact,

    #[error("edge {0} is not an interface edge")]
    NotInterfaceEdge(usize),

    /// The interior block of an element could not be factorized during
    /// static condensation.
    #[error("singular interior block in element {0}")]
    SingularLocalBlock(usize),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("iterative solver did not converge within {0} iterations")]
    NoConvergence(usize),

    /// Reference-solution errors require the fine mesh to be a nested
    /// refinement of the coarse one.
    #[error("reference mesh does not refine the coarse mesh: {0}")]
    NotNested(String),

    #[error("bad level sequence: {0}")]
    BadSequence(String),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Alignment(_) => 3,
            Error::SingularLocalBlock(_) | Error::NotPositiveDefinite | Error::NoConvergence(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
