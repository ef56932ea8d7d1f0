//! Walk and record models: ordered Kraus families with their normalization
//! constraint, lattice sites, and Kraus extraction from a unitary.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::matrix::{dagger, identity, max_abs_diff, CMatrix};
use crate::scalar::{as_f64, RealScalar, Tolerances};

/// Integer lattice site in Z^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeSite(pub Vec<i64>);

impl LatticeSite {
    pub fn origin(d: usize) -> Self {
        LatticeSite(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Site shifted by the j-th step direction: `+e_j` for j < d, `-e_{j-d}`
    /// for j >= d.
    pub fn step(&self, j: usize, d: usize) -> Self {
        let mut coords = self.0.clone();
        if j < d {
            coords[j] += 1;
        } else {
            coords[j - d] -= 1;
        }
        LatticeSite(coords)
    }
}

/// Outcome of checking a Kraus family against sum(A_i* A_i) = I.
#[derive(Debug, Clone)]
pub struct KrausValidation<T> {
    pub dim: usize,
    pub residual: T,
    pub valid: bool,
}

/// Check that all operators share a dimension and sum(A_i* A_i) = I within
/// `tol.norm` (max entrywise deviation).
pub fn validate_kraus<T: RealScalar>(
    operators: &[CMatrix<T>],
    tol: &Tolerances<T>,
) -> Result<KrausValidation<T>> {
    if operators.is_empty() {
        return Err(Error::Structural("empty Kraus family".into()));
    }
    let h = operators[0].nrows();
    for (i, op) in operators.iter().enumerate() {
        if op.nrows() != op.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator {} is {}x{}, expected square",
                i,
                op.nrows(),
                op.ncols()
            )));
        }
        if op.nrows() != h {
            return Err(Error::DimensionMismatch(format!(
                "operator {} has dimension {}, expected {}",
                i,
                op.nrows(),
                h
            )));
        }
        if op.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Structural(format!("operator {} has non-finite entries", i)));
        }
    }
    let mut sum = CMatrix::<T>::zeros(h, h);
    for op in operators {
        sum += dagger(op) * op;
    }
    let residual = max_abs_diff(&sum, &identity(h));
    Ok(KrausValidation {
        dim: h,
        residual,
        valid: residual <= tol.norm,
    })
}

/// Nearest-neighbor walk on Z^d: operator at index i (0-based) effects the
/// step +e_{i+1} for i < d and -e_{i-d+1} for i >= d.
#[derive(Debug, Clone)]
pub struct WalkModel<T: RealScalar> {
    lattice_dim: usize,
    kraus: Vec<CMatrix<T>>,
}

impl<T: RealScalar> WalkModel<T> {
    pub fn new(lattice_dim: usize, kraus: Vec<CMatrix<T>>, tol: &Tolerances<T>) -> Result<Self> {
        if lattice_dim == 0 {
            return Err(Error::Structural("lattice dimension must be at least 1".into()));
        }
        if kraus.len() != 2 * lattice_dim {
            return Err(Error::Structural(format!(
                "walk on Z^{} needs {} operators, got {}",
                lattice_dim,
                2 * lattice_dim,
                kraus.len()
            )));
        }
        let report = validate_kraus(&kraus, tol)?;
        if !report.valid {
            return Err(Error::KrausNormalization {
                residual: as_f64(report.residual),
                tol: as_f64(tol.norm),
            });
        }
        Ok(WalkModel { lattice_dim, kraus })
    }

    pub fn with_default_tol(lattice_dim: usize, kraus: Vec<CMatrix<T>>) -> Result<Self> {
        Self::new(lattice_dim, kraus, &Tolerances::default())
    }

    pub fn lattice_dim(&self) -> usize {
        self.lattice_dim
    }

    pub fn hilbert_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn operators(&self) -> &[CMatrix<T>] {
        &self.kraus
    }

    /// Step vector of direction j as coordinates in R^d.
    pub fn step_vector(&self, j: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.lattice_dim];
        if j < self.lattice_dim {
            v[j] = T::one();
        } else {
            v[j - self.lattice_dim] = -T::one();
        }
        v
    }

    /// Direct sum of two walks on the same lattice (block-diagonal operators).
    pub fn direct_sum(&self, other: &WalkModel<T>) -> Result<WalkModel<T>> {
        if self.lattice_dim != other.lattice_dim {
            return Err(Error::DimensionMismatch(
                "direct sum requires matching lattice dimensions".into(),
            ));
        }
        let (ha, hb) = (self.hilbert_dim(), other.hilbert_dim());
        let kraus = self
            .kraus
            .iter()
            .zip(other.kraus.iter())
            .map(|(a, b)| {
                let mut m = CMatrix::<T>::zeros(ha + hb, ha + hb);
                m.view_mut((0, 0), (ha, ha)).copy_from(a);
                m.view_mut((ha, ha), (hb, hb)).copy_from(b);
                m
            })
            .collect();
        WalkModel::with_default_tol(self.lattice_dim, kraus)
    }
}

/// Measurement-record channel: n Kraus operators, steps are the basis
/// vectors of R^n.
#[derive(Debug, Clone)]
pub struct RecordModel<T: RealScalar> {
    kraus: Vec<CMatrix<T>>,
}

impl<T: RealScalar> RecordModel<T> {
    pub fn new(kraus: Vec<CMatrix<T>>, tol: &Tolerances<T>) -> Result<Self> {
        let report = validate_kraus(&kraus, tol)?;
        if !report.valid {
            return Err(Error::KrausNormalization {
                residual: as_f64(report.residual),
                tol: as_f64(tol.norm),
            });
        }
        Ok(RecordModel { kraus })
    }

    pub fn with_default_tol(kraus: Vec<CMatrix<T>>) -> Result<Self> {
        Self::new(kraus, &Tolerances::default())
    }

    pub fn record_dim(&self) -> usize {
        self.kraus.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn operators(&self) -> &[CMatrix<T>] {
        &self.kraus
    }

    /// Embed as a walk on Z^n with the back half of the family zero. The
    /// record statistics coincide with the embedded walk's.
    pub fn as_walk(&self) -> WalkModel<T> {
        let n = self.record_dim();
        let h = self.hilbert_dim();
        let mut kraus = self.kraus.clone();
        kraus.extend(std::iter::repeat(CMatrix::<T>::zeros(h, h)).take(n));
        WalkModel {
            lattice_dim: n,
            kraus,
        }
    }
}

/// Extract the record channel from a unitary on H (x) K: the Kraus operators
/// are the blocks of the first block column, M_i = U^1_i. The tensor ordering
/// is H (x) K with the K index varying fastest.
pub fn kraus_from_unitary<T: RealScalar>(
    u: &CMatrix<T>,
    h_dim: usize,
    k_dim: usize,
    tol: &Tolerances<T>,
) -> Result<RecordModel<T>> {
    let n = h_dim * k_dim;
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected a {}x{} unitary for h_dim {} and k_dim {}",
            n, n, h_dim, k_dim
        )));
    }
    let residual = max_abs_diff(&(dagger(u) * u), &identity(n));
    if residual > tol.norm {
        return Err(Error::NotUnitary(as_f64(residual)));
    }
    // Block (r, c) of the H-indexed block structure sits at rows r*k..r*k+k,
    // columns c*k..c*k+k; M_i picks entry (i, 0) of each block.
    let mut kraus = Vec::with_capacity(k_dim);
    for i in 0..k_dim {
        let mut m = CMatrix::<T>::zeros(h_dim, h_dim);
        for r in 0..h_dim {
            for c in 0..h_dim {
                m[(r, c)] = u[(r * k_dim + i, c * k_dim)];
            }
        }
        kraus.push(m);
    }
    RecordModel::new(kraus, tol)
}

/// The B/C walk on Z from the two upper/lower triangular operators scaled by
/// 1/sqrt(3). Index 0 steps right (C), index 1 steps left (B).
pub fn bc_walk<T: RealScalar>() -> WalkModel<T> {
    let s = T::one() / crate::scalar::real::<T>(3.0).sqrt();
    let z = |re: T| Complex::new(re, T::zero());
    let c = CMatrix::from_row_slice(2, 2, &[z(s), z(T::zero()), z(-s), z(s)]);
    let b = CMatrix::from_row_slice(2, 2, &[z(s), z(s), z(T::zero()), z(s)]);
    WalkModel::with_default_tol(1, vec![c, b]).expect("bc_walk is normalized")
}

/// The degenerate walk on Z with one possible jump to the left.
pub fn trivial_walk<T: RealScalar>(p: T) -> WalkModel<T> {
    let z = |re: T| Complex::new(re, T::zero());
    let c = CMatrix::from_row_slice(
        2,
        2,
        &[z(T::one()), z(T::zero()), z(T::zero()), z((T::one() - p).sqrt())],
    );
    let b = CMatrix::from_row_slice(
        2,
        2,
        &[z(T::zero()), z(p.sqrt()), z(T::zero()), z(T::zero())],
    );
    WalkModel::with_default_tol(1, vec![c, b]).expect("trivial_walk is normalized")
}

/// Two-dimensional walk built from the B/C pair on the vertical axis plus a
/// damped horizontal pair, with weights lambda = 3/4, alpha = beta = 1/4.
/// Order: E (+e_1), N (+e_2), W (-e_1), S (-e_2). The east operator is
/// (1/2) diag(1, sqrt(7/8)) so the family is exactly normalized.
pub fn oqrw_2d<T: RealScalar>() -> WalkModel<T> {
    let z = |re: f64| Complex::new(crate::scalar::real::<T>(re), T::zero());
    let half = 0.5;
    let n = CMatrix::from_row_slice(2, 2, &[z(half), z(half), z(0.0), z(half)]);
    let s = CMatrix::from_row_slice(2, 2, &[z(half), z(0.0), z(-half), z(half)]);
    let w = CMatrix::from_row_slice(2, 2, &[z(0.0), z(0.125), z(0.0), z(0.125)]);
    let e = CMatrix::from_row_slice(
        2,
        2,
        &[z(half), z(0.0), z(0.0), z(half * (7.0f64 / 8.0).sqrt())],
    );
    WalkModel::with_default_tol(2, vec![e, n, w, s]).expect("2d family is normalized")
}
