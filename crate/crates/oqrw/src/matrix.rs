//! Complex dense matrix helpers at small fixed dimension: Hermiticity and
//! positivity checks, the column-stacking vectorization convention, and the
//! `DensityMatrix` newtype.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{as_f64, real, RealScalar, Tolerances};

/// Dense complex square matrix over the working scalar.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dense complex vector over the working scalar.
pub type CVector<T> = DVector<Complex<T>>;

/// Conjugate transpose.
pub fn dagger<T: RealScalar>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

/// Real part of the trace; callers assert the imaginary part separately
/// when the theory promises a real value.
pub fn trace_re<T: RealScalar>(m: &CMatrix<T>) -> T {
    m.trace().re
}

pub fn trace_im<T: RealScalar>(m: &CMatrix<T>) -> T {
    m.trace().im
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff<T: RealScalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    debug_assert_eq!(a.shape(), b.shape());
    let mut worst = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = (x - y).modulus();
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// Largest entrywise modulus.
pub fn max_abs<T: RealScalar>(m: &CMatrix<T>) -> T {
    m.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Max entrywise deviation from Hermiticity.
pub fn herm_residual<T: RealScalar>(m: &CMatrix<T>) -> T {
    max_abs_diff(m, &m.adjoint())
}

/// `(M + M*)/2`.
pub fn hermitize<T: RealScalar>(m: &CMatrix<T>) -> CMatrix<T> {
    let half = Complex::new(real::<T>(0.5), T::zero());
    (m + m.adjoint()).map(|e| e * half)
}

/// Multiply by a real scalar.
pub fn scale<T: RealScalar>(m: &CMatrix<T>, s: T) -> CMatrix<T> {
    let z = Complex::new(s, T::zero());
    m.map(|e| e * z)
}

/// Eigenvalues of the Hermitized matrix, ascending.
pub fn hermitian_eigenvalues<T: RealScalar>(m: &CMatrix<T>) -> Vec<T> {
    let se = hermitize(m).symmetric_eigen();
    let mut eigs: Vec<T> = se.eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Trace norm: sum of singular values.
pub fn trace_norm<T: RealScalar>(m: &CMatrix<T>) -> T {
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().copied().fold(T::zero(), |a, b| a + b)
}

/// Column-stacking vectorization: entry (r, c) lands at index c*h + r.
pub fn vectorize<T: RealScalar>(m: &CMatrix<T>) -> CVector<T> {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for an h*h-length vector.
pub fn devectorize<T: RealScalar>(v: &CVector<T>, h: usize) -> CMatrix<T> {
    assert_eq!(v.len(), h * h, "vector length does not match h^2");
    CMatrix::from_column_slice(h, h, v.as_slice())
}

/// Kronecker product, ordered so that `vec(A X B) = (B^T kron A) vec(X)`.
pub fn kron<T: RealScalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn identity<T: RealScalar>(h: usize) -> CMatrix<T> {
    CMatrix::identity(h, h)
}

/// Hermitian, positive semi-definite, unit trace complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: RealScalar> {
    matrix: CMatrix<T>,
}

impl<T: RealScalar> DensityMatrix<T> {
    /// Validate and wrap. Hermiticity and trace are checked entrywise to
    /// `tol.herm`; eigenvalues must stay above `-tol.herm`.
    pub fn new(matrix: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensity("non-finite entry".into()));
        }
        let hr = herm_residual(&matrix);
        if hr > tol.herm {
            return Err(Error::InvalidDensity(format!(
                "Hermiticity residual {:.3e}",
                as_f64(hr)
            )));
        }
        let tr = matrix.trace();
        let tr_dev = (tr - Complex::new(T::one(), T::zero())).modulus();
        if tr_dev > tol.herm {
            return Err(Error::InvalidDensity(format!(
                "trace deviates from 1 by {:.3e}",
                as_f64(tr_dev)
            )));
        }
        let min_eig = hermitian_eigenvalues(&matrix)
            .first()
            .copied()
            .unwrap_or_else(T::zero);
        if min_eig < -tol.herm {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {:.3e}",
                as_f64(min_eig)
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn with_default_tol(matrix: CMatrix<T>) -> Result<Self> {
        Self::new(matrix, &Tolerances::default())
    }

    /// Skip validation. Reserved for callers that have just produced the
    /// matrix by a positivity-preserving construction.
    pub fn from_matrix_unchecked(matrix: CMatrix<T>) -> Self {
        DensityMatrix { matrix }
    }

    /// Maximally mixed state I/h.
    pub fn maximally_mixed(h: usize) -> Self {
        let scale = Complex::new(T::one() / real::<T>(h as f64), T::zero());
        DensityMatrix {
            matrix: identity::<T>(h).map(|e| e * scale),
        }
    }

    /// Pure state |phi><phi| from an (unnormalized) vector.
    pub fn pure(phi: &CVector<T>) -> Self {
        let n2: T = phi.iter().map(|z| z.modulus_squared()).fold(T::zero(), |a, b| a + b);
        let inv = Complex::new(T::one() / n2, T::zero());
        DensityMatrix {
            matrix: (phi * phi.adjoint()).map(|e| e * inv),
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Trace-norm distance to another state.
    pub fn trace_distance(&self, other: &DensityMatrix<T>) -> T {
        trace_norm(&(&self.matrix - &other.matrix))
    }
}
