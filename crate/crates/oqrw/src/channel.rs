//! The completely positive map L(rho) = sum A_i rho A_i*, its adjoint, its
//! matrix realization on vectorized operators, and the invariant state with
//! spectral diagnostics.

use nalgebra::{Complex, ComplexField};

use crate::error::{Error, Result};
use crate::matrix::{
    dagger, devectorize, hermitian_eigenvalues, hermitize, identity, kron, scale, trace_norm,
    CMatrix, DensityMatrix,
};
use crate::scalar::{as_f64, real, RealScalar, Tolerances};

/// Anything exposing an ordered Kraus family. Implemented by both walk and
/// record models so the channel machinery is shared.
pub trait KrausFamily<T: RealScalar> {
    fn kraus_operators(&self) -> &[CMatrix<T>];

    fn hilbert_dim(&self) -> usize {
        self.kraus_operators()[0].nrows()
    }
}

impl<T: RealScalar> KrausFamily<T> for crate::model::WalkModel<T> {
    fn kraus_operators(&self) -> &[CMatrix<T>] {
        self.operators()
    }
}

impl<T: RealScalar> KrausFamily<T> for crate::model::RecordModel<T> {
    fn kraus_operators(&self) -> &[CMatrix<T>] {
        self.operators()
    }
}

impl<T: RealScalar> KrausFamily<T> for [CMatrix<T>] {
    fn kraus_operators(&self) -> &[CMatrix<T>] {
        self
    }
}

/// L(rho) = sum_i A_i rho A_i*.
pub fn apply_channel<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    rho: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let h = model.hilbert_dim();
    if rho.nrows() != h || rho.ncols() != h {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, channel acts on {}x{}",
            rho.nrows(),
            rho.ncols(),
            h,
            h
        )));
    }
    let mut out = CMatrix::<T>::zeros(h, h);
    for a in model.kraus_operators() {
        out += a * rho * dagger(a);
    }
    Ok(out)
}

/// Adjoint map L*(X) = sum_i A_i* X A_i, dual via Tr(L(rho) X) = Tr(rho L*(X)).
pub fn apply_adjoint<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    x: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let h = model.hilbert_dim();
    if x.nrows() != h || x.ncols() != h {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}x{}, channel acts on {}x{}",
            x.nrows(),
            x.ncols(),
            h,
            h
        )));
    }
    let mut out = CMatrix::<T>::zeros(h, h);
    for a in model.kraus_operators() {
        out += dagger(a) * x * a;
    }
    Ok(out)
}

/// Matrix of L on vectorized operators: sum_i conj(A_i) (x) A_i under the
/// column-stacking convention.
pub fn superoperator<T: RealScalar, M: KrausFamily<T> + ?Sized>(model: &M) -> CMatrix<T> {
    let h = model.hilbert_dim();
    let mut s = CMatrix::<T>::zeros(h * h, h * h);
    for a in model.kraus_operators() {
        s += kron(&a.map(|z| z.conj()), a);
    }
    s
}

/// Matrix of the adjoint map L* on vectorized operators:
/// vec(A* X A) = (A^T (x) A*) vec(X), summed over the family.
pub fn adjoint_superoperator<T: RealScalar, M: KrausFamily<T> + ?Sized>(model: &M) -> CMatrix<T> {
    let h = model.hilbert_dim();
    let mut s = CMatrix::<T>::zeros(h * h, h * h);
    for a in model.kraus_operators() {
        s += kron(&a.transpose(), &dagger(a));
    }
    s
}

/// Spectrum summary of the channel, used to probe uniqueness of the
/// invariant state.
#[derive(Debug, Clone)]
pub struct SpectralDiagnostics<T> {
    /// All h^2 eigenvalues of the superoperator.
    pub eigenvalues: Vec<Complex<T>>,
    /// Numerical multiplicity of eigenvalue 1: singular values of
    /// (superoperator - I) below `tol.fix`.
    pub fixed_space_dim: usize,
    /// Eigenvalues with modulus above 1 - tol.spec, the peripheral spectrum.
    pub peripheral: Vec<Complex<T>>,
    /// Largest eigenvalue modulus.
    pub spectral_radius: T,
}

fn eigenvalues_of<T: RealScalar>(m: &CMatrix<T>) -> Vec<Complex<T>> {
    // Complex Schur form is upper triangular; the diagonal carries the
    // spectrum.
    let (_q, t) = m.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Compute the unique invariant state of the channel, or report why it is
/// not unique. Extraction goes through the SVD of (superoperator - I): the
/// right singular vector of the smallest singular value is devectorized,
/// Hermitized, sign-fixed and normalized to trace one.
/// Spectrum summary of the channel; does not require uniqueness of the
/// invariant state.
pub fn spectral_diagnostics<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    tol: &Tolerances<T>,
) -> SpectralDiagnostics<T> {
    let h = model.hilbert_dim();
    let s = superoperator(model);
    let eigenvalues = eigenvalues_of(&s);
    let spectral_radius = eigenvalues
        .iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let peripheral: Vec<Complex<T>> = eigenvalues
        .iter()
        .copied()
        .filter(|z| z.modulus() > T::one() - tol.spec)
        .collect();
    let shifted = s - identity::<T>(h * h);
    let svd = shifted.svd(false, false);
    let fixed_space_dim = svd
        .singular_values
        .iter()
        .filter(|&&sv| sv < tol.fix)
        .count();
    SpectralDiagnostics {
        eigenvalues,
        fixed_space_dim,
        peripheral,
        spectral_radius,
    }
}

pub fn invariant_state<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    tol: &Tolerances<T>,
) -> Result<(DensityMatrix<T>, SpectralDiagnostics<T>)> {
    let h = model.hilbert_dim();
    let diagnostics = spectral_diagnostics(model, tol);
    let fixed_space_dim = diagnostics.fixed_space_dim;
    let s = superoperator(model);
    let shifted = &s - identity::<T>(h * h);
    let svd = shifted.svd(false, true);
    if fixed_space_dim == 0 {
        return Err(Error::NumericalDegeneracy(
            "no numerical fixed point of the channel".into(),
        ));
    }
    if fixed_space_dim > 1 {
        return Err(Error::NonUniqueInvariantState { fixed_space_dim });
    }

    // Smallest singular value's right singular vector.
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut min_idx = 0;
    let mut min_sv = svd.singular_values[0];
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv < min_sv {
            min_sv = sv;
            min_idx = i;
        }
    }
    let fixed_vec = v_t.row(min_idx).adjoint();
    let raw = devectorize(&fixed_vec.column(0).into_owned(), h);
    let mut candidate = hermitize(&raw);
    let tr = candidate.trace().re;
    if tr < T::zero() {
        candidate = scale(&candidate, -T::one());
    }
    let tr = candidate.trace().re;
    if tr.abs() < real(1e-14) {
        return Err(Error::NumericalDegeneracy(
            "fixed operator is traceless after Hermitization".into(),
        ));
    }
    let rho = scale(&candidate, T::one() / tr);

    let min_eig = hermitian_eigenvalues(&rho)
        .first()
        .copied()
        .unwrap_or_else(T::zero);
    if min_eig < -tol.herm {
        return Err(Error::NumericalDegeneracy(format!(
            "extracted fixed operator is not positive (min eigenvalue {:.3e})",
            as_f64(min_eig)
        )));
    }

    let rho = DensityMatrix::new(rho, tol)?;
    // Fixed-point sanity: L(rho) = rho.
    let image = apply_channel(model, rho.matrix())?;
    let drift = crate::matrix::max_abs_diff(&image, rho.matrix());
    if drift > real(1e-10) {
        return Err(Error::NumericalDegeneracy(format!(
            "fixed-point residual {:.3e}",
            as_f64(drift)
        )));
    }
    Ok((rho, diagnostics))
}

/// Trace-norm distance between the running Cesaro average of `states` and
/// `target`.
pub fn cesaro_distance<T: RealScalar>(
    states: &[DensityMatrix<T>],
    target: &DensityMatrix<T>,
) -> T {
    assert!(!states.is_empty(), "cesaro_distance needs at least one state");
    let h = target.dim();
    let mut sum = CMatrix::<T>::zeros(h, h);
    for s in states {
        sum += s.matrix();
    }
    let avg = scale(&sum, T::one() / real(states.len() as f64));
    trace_norm(&(avg - target.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bc_walk, trivial_walk};
    use crate::matrix::{max_abs_diff, vectorize};
    use nalgebra::{Complex, ComplexField};

    fn c64(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn diag10() -> CMatrix<f64> {
        CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)])
    }

    #[test]
    fn bc_channel_fixes_maximally_mixed() {
        let model = bc_walk::<f64>();
        let rho = DensityMatrix::maximally_mixed(2);
        let out = apply_channel(&model, rho.matrix()).unwrap();
        assert!(max_abs_diff(&out, rho.matrix()) < 1e-14);
    }

    #[test]
    fn identity_channel_is_identity() {
        let ops = [identity::<f64>(2)];
        let rho = diag10();
        let out = apply_channel(&ops[..], &rho).unwrap();
        assert!(max_abs_diff(&out, &rho) < 1e-15);
    }

    #[test]
    fn bc_channel_on_ground_state() {
        // (1/3)[[2,-1],[-1,1]] by hand.
        let model = bc_walk::<f64>();
        let out = apply_channel(&model, &diag10()).unwrap();
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[
                c64(2.0 / 3.0, 0.0),
                c64(-1.0 / 3.0, 0.0),
                c64(-1.0 / 3.0, 0.0),
                c64(1.0 / 3.0, 0.0),
            ],
        );
        assert!(max_abs_diff(&out, &expect) < 1e-14);
    }

    #[test]
    fn adjoint_is_unital() {
        let model = bc_walk::<f64>();
        let out = apply_adjoint(&model, &identity(2)).unwrap();
        assert!(max_abs_diff(&out, &identity(2)) < 1e-14);
    }

    #[test]
    fn adjoint_on_ground_projector() {
        // B*XB + C*XC = (1/3)[[2,1],[1,1]] by hand.
        let model = bc_walk::<f64>();
        let out = apply_adjoint(&model, &diag10()).unwrap();
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[
                c64(2.0 / 3.0, 0.0),
                c64(1.0 / 3.0, 0.0),
                c64(1.0 / 3.0, 0.0),
                c64(1.0 / 3.0, 0.0),
            ],
        );
        assert!(max_abs_diff(&out, &expect) < 1e-14);
    }

    #[test]
    fn superoperator_identity_channel() {
        let ops = [identity::<f64>(2)];
        let s = superoperator(&ops[..]);
        assert!(max_abs_diff(&s, &identity(4)) < 1e-15);
    }

    #[test]
    fn superoperator_fixes_vectorized_invariant() {
        let model = bc_walk::<f64>();
        let s = superoperator(&model);
        let rho = DensityMatrix::<f64>::maximally_mixed(2);
        let v = vectorize(rho.matrix());
        let out = &s * &v;
        for (a, b) in out.iter().zip(v.iter()) {
            assert!((a - b).modulus() < 1e-14);
        }
    }

    #[test]
    fn bc_invariant_state_is_maximally_mixed() {
        let model = bc_walk::<f64>();
        let (rho, diag) = invariant_state(&model, &Tolerances::default()).unwrap();
        assert_eq!(diag.fixed_space_dim, 1);
        assert!(max_abs_diff(rho.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-10);
        assert!(diag.spectral_radius <= 1.0 + 1e-8);
    }

    #[test]
    fn trivial_invariant_state_is_ground_projector() {
        let model = trivial_walk::<f64>(0.5);
        let (rho, diag) = invariant_state(&model, &Tolerances::default()).unwrap();
        assert_eq!(diag.fixed_space_dim, 1);
        assert!(max_abs_diff(rho.matrix(), &diag10()) < 1e-10);
    }

    #[test]
    fn direct_sum_has_two_fixed_points() {
        let model = bc_walk::<f64>().direct_sum(&trivial_walk(0.5)).unwrap();
        match invariant_state(&model, &Tolerances::default()) {
            Err(Error::NonUniqueInvariantState { fixed_space_dim }) => {
                assert_eq!(fixed_space_dim, 2)
            }
            other => panic!("expected non-uniqueness, got {:?}", other.map(|(r, _)| r)),
        }
    }

    #[test]
    fn cesaro_distance_basics() {
        let rho = DensityMatrix::<f64>::maximally_mixed(2);
        let same = vec![rho.clone(), rho.clone()];
        assert!(cesaro_distance(&same, &rho) < 1e-15);

        let other = DensityMatrix::with_default_tol(diag10()).unwrap();
        let constant = vec![other.clone()];
        let d = cesaro_distance(&constant, &rho);
        assert!((d - other.trace_distance(&rho)).abs() < 1e-14);
    }
}
