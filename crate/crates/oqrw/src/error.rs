use thiserror::Error;

/// Errors produced by model validation and the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Kraus normalization residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    KrausNormalization { residual: f64, tol: f64 },

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invariant state is not unique (fixed space dimension {fixed_space_dim}); \
             consider a block decomposition")]
    NonUniqueInvariantState { fixed_space_dim: usize },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("Poisson equation residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    PoissonResidual { residual: f64, tol: f64 },

    #[error("projectors do not commute with the walk operators (max residual {residual:.3e})")]
    NotBlockDiagonal { residual: f64 },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("numerical integrity violated: {0}")]
    Integrity(String),
}

pub type Result<V> = std::result::Result<V, Error>;
