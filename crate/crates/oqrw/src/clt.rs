//! Closed-form central limit theorem parameters for walks and measurement
//! records: drift, Poisson-equation solutions, and the covariance matrix of
//! the limiting Gaussian.

use nalgebra::{DMatrix, DVector};

use crate::channel::{
    adjoint_superoperator, apply_adjoint, invariant_state, KrausFamily, SpectralDiagnostics,
};
use crate::error::{Error, Result};
use crate::matrix::{
    dagger, devectorize, hermitian_eigenvalues, hermitize, identity, max_abs, scale, vectorize,
    CMatrix, DensityMatrix,
};
use crate::model::{RecordModel, WalkModel};
use crate::scalar::{as_f64, real, RealScalar, Tolerances};

/// Whether a report describes a lattice walk or a measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CltMode {
    Walk,
    Record,
}

/// Analytic CLT parameters of a model satisfying (H1).
#[derive(Debug, Clone)]
pub struct CltReport<T: RealScalar> {
    pub mode: CltMode,
    /// Dimension of the limit Gaussian: lattice dim for walks, number of
    /// Kraus operators for records.
    pub dim: usize,
    pub rho_inf: DensityMatrix<T>,
    pub diagnostics: SpectralDiagnostics<T>,
    /// Drift vector m.
    pub drift: DVector<T>,
    /// Gauge-fixed Poisson solutions L_1..L_dim with Tr(rho_inf L_i) = 0.
    pub poisson_ops: Vec<CMatrix<T>>,
    /// Residual of each Poisson solve.
    pub poisson_residuals: Vec<T>,
    /// Covariance of the limit Gaussian.
    pub covariance: DMatrix<T>,
}

/// Step-vector geometry shared by walks and records: each Kraus operator
/// carries a displacement in R^dim.
fn step_vectors<T: RealScalar>(mode: CltMode, dim: usize, n_ops: usize) -> Vec<DVector<T>> {
    match mode {
        CltMode::Walk => (0..n_ops)
            .map(|j| {
                let mut v = DVector::zeros(dim);
                if j < dim {
                    v[j] = T::one();
                } else {
                    v[j - dim] = -T::one();
                }
                v
            })
            .collect(),
        CltMode::Record => (0..n_ops)
            .map(|j| {
                let mut v = DVector::zeros(dim);
                v[j] = T::one();
                v
            })
            .collect(),
    }
}

fn real_trace<T: RealScalar>(m: &CMatrix<T>) -> Result<T> {
    let tr = m.trace();
    if tr.im.abs() > real(1e-10) {
        return Err(Error::Integrity(format!(
            "trace expected real, imaginary part {:.3e}",
            as_f64(tr.im)
        )));
    }
    Ok(tr.re)
}

fn drift_from_steps<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    rho_inf: &DensityMatrix<T>,
    steps: &[DVector<T>],
) -> Result<DVector<T>> {
    let dim = steps[0].len();
    let mut m = DVector::zeros(dim);
    for (a, e) in model.kraus_operators().iter().zip(steps) {
        let p = real_trace(&(a * rho_inf.matrix() * dagger(a)))?;
        m += e * p;
    }
    Ok(m)
}

/// Drift m = sum_j Tr(A_j rho_inf A_j*) e_j of a walk, as a vector in R^d.
pub fn drift<T: RealScalar>(
    model: &WalkModel<T>,
    rho_inf: &DensityMatrix<T>,
) -> Result<DVector<T>> {
    let steps = step_vectors(CltMode::Walk, model.lattice_dim(), model.operators().len());
    drift_from_steps(model, rho_inf, &steps)
}

/// Right-hand side of the Poisson equation for direction l:
/// sum_j A_j* A_j (e_j . l) - (m . l) I.
fn poisson_rhs<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    drift_vec: &DVector<T>,
    steps: &[DVector<T>],
    l: &DVector<T>,
) -> CMatrix<T> {
    let h = model.hilbert_dim();
    let mut rhs = CMatrix::<T>::zeros(h, h);
    for (a, e) in model.kraus_operators().iter().zip(steps) {
        let w = e.dot(l);
        rhs += scale(&(dagger(a) * a), w);
    }
    rhs - scale(&identity(h), drift_vec.dot(l))
}

/// Solution of the Poisson solve: the operator, gauge-fixed so that
/// Tr(rho_inf L) = 0, plus the residual of (L - adjoint(L)) - RHS.
pub struct PoissonSolution<T: RealScalar> {
    pub operator: CMatrix<T>,
    pub residual: T,
}

fn solve_poisson_inner<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    rho_inf: &DensityMatrix<T>,
    rhs: &CMatrix<T>,
    tol: &Tolerances<T>,
) -> Result<PoissonSolution<T>> {
    let h = model.hilbert_dim();
    // (I - adjoint superoperator) vec(L) = vec(RHS), minimum-norm least
    // squares through the SVD pseudoinverse: the system is singular by
    // construction (any solution shifts by multiples of I).
    let system = identity::<T>(h * h) - adjoint_superoperator(model);
    let b = vectorize(rhs);
    let b_mat = DMatrix::from_column_slice(h * h, 1, b.as_slice());
    let svd = system.svd(true, true);
    let x = svd
        .solve(&b_mat, real(1e-10))
        .map_err(|e| Error::NumericalDegeneracy(format!("Poisson SVD solve failed: {e}")))?;
    let raw = devectorize(&x.column(0).into_owned(), h);
    let l_op = hermitize(&raw);

    // Gauge fix: subtract Tr(rho_inf L) I.
    let gauge = real_trace(&(rho_inf.matrix() * &l_op))?;
    let l_op = &l_op - scale(&identity(h), gauge);

    let reconstructed = &l_op - apply_adjoint(model, &l_op)?;
    let residual = max_abs(&(reconstructed - rhs));
    if residual > tol.poisson {
        return Err(Error::PoissonResidual {
            residual: as_f64(residual),
            tol: as_f64(tol.poisson),
        });
    }
    Ok(PoissonSolution { operator: l_op, residual })
}

/// Solve the Poisson equation of a walk for direction l in R^d.
pub fn solve_poisson<T: RealScalar>(
    model: &WalkModel<T>,
    rho_inf: &DensityMatrix<T>,
    l: &DVector<T>,
    tol: &Tolerances<T>,
) -> Result<PoissonSolution<T>> {
    let steps = step_vectors(CltMode::Walk, model.lattice_dim(), model.operators().len());
    let m = drift_from_steps(model, rho_inf, &steps)?;
    let rhs = poisson_rhs(model, &m, &steps, l);
    solve_poisson_inner(model, rho_inf, &rhs, tol)
}

fn covariance_from_parts<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    rho_inf: &DensityMatrix<T>,
    drift_vec: &DVector<T>,
    l_ops: &[CMatrix<T>],
    steps: &[DVector<T>],
    tol: &Tolerances<T>,
) -> Result<DMatrix<T>> {
    let dim = drift_vec.len();
    let rho = rho_inf.matrix();
    // Per-operator occupation probabilities and cross terms.
    let mut probs = Vec::with_capacity(steps.len());
    for a in model.kraus_operators() {
        probs.push(a * rho * dagger(a));
    }
    let mut c = DMatrix::<T>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut value = -drift_vec[i] * drift_vec[j];
            for (p, e) in probs.iter().zip(steps) {
                // delta_ij-style diagonal weight plus the L cross terms,
                // written uniformly through the step vectors.
                value += e[i] * e[j] * real_trace(p)?;
                value += e[i] * real_trace(&(p * &l_ops[j]))?;
                value += e[j] * real_trace(&(p * &l_ops[i]))?;
            }
            // Gauge terms -(m_i Tr(rho L_j) + m_j Tr(rho L_i)); zero in the
            // fixed gauge but kept so arbitrary gauges stay correct.
            value -= drift_vec[i] * real_trace(&(rho * &l_ops[j]))?;
            value -= drift_vec[j] * real_trace(&(rho * &l_ops[i]))?;
            c[(i, j)] = value;
        }
    }
    // Consistency: symmetric and PSD within tolerance.
    let mut asym = T::zero();
    for i in 0..dim {
        for j in 0..dim {
            let d = (c[(i, j)] - c[(j, i)]).abs();
            if d > asym {
                asym = d;
            }
        }
    }
    if asym > tol.herm {
        return Err(Error::Integrity(format!(
            "covariance asymmetry {:.3e}",
            as_f64(asym)
        )));
    }
    let c_complex = c.map(|x| nalgebra::Complex::new(x, T::zero()));
    let min_eig = hermitian_eigenvalues(&c_complex)
        .first()
        .copied()
        .unwrap_or_else(T::zero);
    if min_eig < -real::<T>(1e-8) {
        return Err(Error::Integrity(format!(
            "covariance has negative eigenvalue {:.3e}",
            as_f64(min_eig)
        )));
    }
    Ok(c)
}

/// Covariance matrix of the limiting Gaussian of a walk, from the invariant
/// state, drift and Poisson solutions. Gauge-invariant in the `l_ops`.
pub fn covariance<T: RealScalar>(
    model: &WalkModel<T>,
    rho_inf: &DensityMatrix<T>,
    drift_vec: &DVector<T>,
    l_ops: &[CMatrix<T>],
    tol: &Tolerances<T>,
) -> Result<DMatrix<T>> {
    let steps = step_vectors(CltMode::Walk, model.lattice_dim(), model.operators().len());
    covariance_from_parts(model, rho_inf, drift_vec, l_ops, &steps, tol)
}

/// sigma_l^2 = Tr(rho_inf Gamma_l) with Gamma_l from the martingale second
/// moment. Independent route to the quadratic form l^T C l, used for
/// cross-checking the covariance assembly.
pub fn sigma2_quadratic_form<T: RealScalar, M: KrausFamily<T> + ?Sized>(
    model: &M,
    mode: CltMode,
    dim: usize,
    rho_inf: &DensityMatrix<T>,
    drift_vec: &DVector<T>,
    l: &DVector<T>,
    l_op: &CMatrix<T>,
) -> Result<T> {
    let steps = step_vectors::<T>(mode, dim, model.kraus_operators().len());
    let h = model.hilbert_dim();
    let ml = drift_vec.dot(l);
    let mut gamma = CMatrix::<T>::zeros(h, h);
    let two = real::<T>(2.0);
    for (a, e) in model.kraus_operators().iter().zip(&steps) {
        let w = e.dot(l) - ml;
        gamma += scale(&(dagger(a) * a), w * w);
        gamma += scale(&(dagger(a) * l_op * a), two * w);
    }
    real_trace(&(rho_inf.matrix() * gamma))
}

/// Full analytic pipeline for a walk under (H1): invariant state, drift,
/// Poisson solutions for each coordinate direction, covariance.
pub fn walk_clt<T: RealScalar>(model: &WalkModel<T>, tol: &Tolerances<T>) -> Result<CltReport<T>> {
    let (rho_inf, diagnostics) = invariant_state(model, tol)?;
    let d = model.lattice_dim();
    let steps = step_vectors(CltMode::Walk, d, model.operators().len());
    let m = drift_from_steps(model, &rho_inf, &steps)?;
    let mut poisson_ops = Vec::with_capacity(d);
    let mut poisson_residuals = Vec::with_capacity(d);
    for i in 0..d {
        let mut l = DVector::zeros(d);
        l[i] = T::one();
        let rhs = poisson_rhs(model, &m, &steps, &l);
        let sol = solve_poisson_inner(model, &rho_inf, &rhs, tol)?;
        poisson_ops.push(sol.operator);
        poisson_residuals.push(sol.residual);
    }
    let c = covariance_from_parts(model, &rho_inf, &m, &poisson_ops, &steps, tol)?;
    Ok(CltReport {
        mode: CltMode::Walk,
        dim: d,
        rho_inf,
        diagnostics,
        drift: m,
        poisson_ops,
        poisson_residuals,
        covariance: c,
    })
}

/// One-dimensional shortcut: m = 1 - 2 Tr(A_2 rho_inf A_2*) and the
/// simplified variance formula. Must agree with the general pipeline.
pub fn variance_1d<T: RealScalar>(
    model: &WalkModel<T>,
    rho_inf: &DensityMatrix<T>,
    tol: &Tolerances<T>,
) -> Result<(T, T)> {
    if model.lattice_dim() != 1 {
        return Err(Error::Structural(format!(
            "variance_1d requires d = 1, got d = {}",
            model.lattice_dim()
        )));
    }
    let a1 = &model.operators()[0];
    let a2 = &model.operators()[1];
    let rho = rho_inf.matrix();
    let two = real::<T>(2.0);
    let four = real::<T>(4.0);

    let m = T::one() - two * real_trace(&(a2 * rho * dagger(a2)))?;
    let l = DVector::from_element(1, T::one());
    let sol = solve_poisson(model, rho_inf, &l, tol)?;
    let l_op = &sol.operator;
    // sigma^2 = 1 - m^2 + 4 (Tr(rho A_1* L A_1) - Tr(A_1 rho A_1*) Tr(rho L))
    let t_sandwich = real_trace(&(rho * dagger(a1) * l_op * a1))?;
    let t_p1 = real_trace(&(a1 * rho * dagger(a1)))?;
    let t_gauge = real_trace(&(rho * l_op))?;
    let sigma2 = T::one() - m * m + four * (t_sandwich - t_p1 * t_gauge);
    Ok((m, sigma2))
}

/// Analytic CLT for a measurement record: the limit lives in R^n with one
/// coordinate per Kraus operator. Cross-checked against the zero-padded walk
/// embedding.
pub fn record_clt<T: RealScalar>(
    model: &RecordModel<T>,
    tol: &Tolerances<T>,
) -> Result<CltReport<T>> {
    let (rho_inf, diagnostics) = invariant_state(model, tol)?;
    let n = model.record_dim();
    let steps = step_vectors(CltMode::Record, n, n);
    let m = drift_from_steps(model, &rho_inf, &steps)?;
    let mut poisson_ops = Vec::with_capacity(n);
    let mut poisson_residuals = Vec::with_capacity(n);
    for i in 0..n {
        let mut l = DVector::zeros(n);
        l[i] = T::one();
        let rhs = poisson_rhs(model, &m, &steps, &l);
        let sol = solve_poisson_inner(model, &rho_inf, &rhs, tol)?;
        poisson_ops.push(sol.operator);
        poisson_residuals.push(sol.residual);
    }
    let c = covariance_from_parts(model, &rho_inf, &m, &poisson_ops, &steps, tol)?;

    // Embedding cross-check: the walk with A_1..A_n = M_1..M_n and the rest
    // zero must produce the same covariance.
    let embedded = model.as_walk();
    let c_embedded = walk_clt(&embedded, tol)?.covariance;
    let mut worst = T::zero();
    for (a, b) in c.iter().zip(c_embedded.iter()) {
        let d = (*a - *b).abs();
        if d > worst {
            worst = d;
        }
    }
    if worst > real(1e-10) {
        return Err(Error::Integrity(format!(
            "record/walk embedding covariance mismatch {:.3e}",
            as_f64(worst)
        )));
    }

    Ok(CltReport {
        mode: CltMode::Record,
        dim: n,
        rho_inf,
        diagnostics,
        drift: m,
        poisson_ops,
        poisson_residuals,
        covariance: c,
    })
}

/// Solve the Poisson equation of a record channel for direction l in R^n.
pub fn solve_poisson_record<T: RealScalar>(
    model: &RecordModel<T>,
    rho_inf: &DensityMatrix<T>,
    l: &DVector<T>,
    tol: &Tolerances<T>,
) -> Result<PoissonSolution<T>> {
    let n = model.record_dim();
    let steps = step_vectors(CltMode::Record, n, n);
    let m = drift_from_steps(model, rho_inf, &steps)?;
    let rhs = poisson_rhs(model, &m, &steps, l);
    solve_poisson_inner(model, rho_inf, &rhs, tol)
}

/// Expose the Poisson RHS for a walk direction (used by solvability tests).
pub fn walk_poisson_rhs<T: RealScalar>(
    model: &WalkModel<T>,
    rho_inf: &DensityMatrix<T>,
    l: &DVector<T>,
) -> Result<CMatrix<T>> {
    let steps = step_vectors(CltMode::Walk, model.lattice_dim(), model.operators().len());
    let m = drift_from_steps(model, rho_inf, &steps)?;
    Ok(poisson_rhs(model, &m, &steps, l))
}
