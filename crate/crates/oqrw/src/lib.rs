//! Open Quantum Random Walks on Z^d: exact distribution evolution, quantum
//! trajectory Monte Carlo, and closed-form central limit theorem parameters
//! (drift, Poisson-equation solutions, covariance), including measurement
//! records and block-diagonal mixtures.

pub mod blocks;
pub mod channel;
pub mod clt;
pub mod error;
pub mod exact;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::{RealScalar, Tolerances};

/// Concrete f64 aliases; this is what the CLI and most users work with.
pub type CMatrix64 = matrix::CMatrix<f64>;
pub type CVector64 = matrix::CVector<f64>;
pub type DensityMatrix64 = matrix::DensityMatrix<f64>;
pub type WalkModel64 = model::WalkModel<f64>;
pub type RecordModel64 = model::RecordModel<f64>;
pub type Tolerances64 = Tolerances<f64>;
pub type CltReport64 = clt::CltReport<f64>;
pub type SiteDistribution64 = exact::SiteDistribution<f64>;
pub type EmpiricalStats64 = trajectory::EmpiricalStats<f64>;
pub type MixtureReport64 = blocks::MixtureReport<f64>;
