//! Scalar abstraction: every numerical routine in this crate is generic over
//! the underlying real type. `f64` is what you want in practice; `f32` exists
//! for quick experiments where the 1e-10 default tolerances are out of reach.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type backing all matrix computations.
pub trait RealScalar: RealField + FromPrimitive + ToPrimitive + Copy {}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

/// Shorthand for pulling an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn real<T: RealScalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Lossy view of a scalar as `f64`, used for error reporting only.
#[inline]
pub(crate) fn as_f64<T: RealScalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Numerical tolerances used across the crate. All of them are absolute:
/// the matrices involved are tiny and of unit scale.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    /// Max entrywise deviation allowed in Hermiticity checks.
    pub herm: T,
    /// Max entrywise deviation of sum(A_i* A_i) from the identity.
    pub norm: T,
    /// Singular values of (superoperator - I) below this count as zero.
    pub fix: T,
    /// Eigenvalues with modulus above 1 - spec are reported as peripheral.
    pub spec: T,
    /// Max residual accepted from the Poisson equation solve.
    pub poisson: T,
}

impl<T: RealScalar> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            herm: real(1e-10),
            norm: real(1e-10),
            fix: real(1e-8),
            spec: real(1e-6),
            poisson: real(1e-9),
        }
    }
}

impl<T: RealScalar> Tolerances<T> {
    /// Uniformly scale the validation tolerances (herm/norm) by `factor`,
    /// keeping the spectral thresholds untouched. Used by the CLI `--tol` flag.
    pub fn scaled(factor: T) -> Self {
        let base = Self::default();
        Tolerances {
            herm: base.herm * factor,
            norm: base.norm * factor,
            ..base
        }
    }
}
