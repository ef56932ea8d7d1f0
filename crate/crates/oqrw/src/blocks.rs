//! Block-diagonal walks: verification of a user-supplied orthogonal
//! decomposition commuting with the Kraus family, restriction to each block,
//! the per-outcome martingale identity, and per-block CLT parameters of the
//! resulting Gaussian mixture.

use nalgebra::{Complex, ComplexField, DVector};

use crate::clt::{walk_clt, CltReport};
use crate::error::{Error, Result};
use crate::matrix::{dagger, hermitize, identity, max_abs, max_abs_diff, CMatrix, DensityMatrix};
use crate::model::WalkModel;
use crate::scalar::{as_f64, real, RealScalar, Tolerances};

/// Verified orthogonal decomposition of the internal space commuting with
/// every walk operator: projectors P_j plus isometries V_j whose columns
/// form an orthonormal basis of each block.
#[derive(Debug, Clone)]
pub struct BlockDecomposition<T: RealScalar> {
    projectors: Vec<CMatrix<T>>,
    isometries: Vec<CMatrix<T>>,
}

impl<T: RealScalar> BlockDecomposition<T> {
    pub fn blocks(&self) -> usize {
        self.projectors.len()
    }

    pub fn projector(&self, j: usize) -> &CMatrix<T> {
        &self.projectors[j]
    }

    pub fn isometry(&self, j: usize) -> &CMatrix<T> {
        &self.isometries[j]
    }

    /// Internal dimension of block j.
    pub fn block_dim(&self, j: usize) -> usize {
        self.isometries[j].ncols()
    }
}

/// Check the projector algebra (Hermitian idempotents, pairwise orthogonal,
/// resolving the identity) and commutation with every walk operator, then
/// build the block isometries.
pub fn verify_blocks<T: RealScalar>(
    model: &WalkModel<T>,
    projectors: &[CMatrix<T>],
    tol: &Tolerances<T>,
) -> Result<BlockDecomposition<T>> {
    if projectors.is_empty() {
        return Err(Error::Structural("no projectors supplied".into()));
    }
    let h = model.hilbert_dim();
    for (j, p) in projectors.iter().enumerate() {
        if p.nrows() != h || p.ncols() != h {
            return Err(Error::DimensionMismatch(format!(
                "projector {j} is {}x{}, expected {h}x{h}",
                p.nrows(),
                p.ncols()
            )));
        }
        let herm = max_abs_diff(p, &dagger(p));
        if herm > tol.herm {
            return Err(Error::Structural(format!(
                "projector {j} not Hermitian (residual {:.3e})",
                as_f64(herm)
            )));
        }
        let idem = max_abs_diff(&(p * p), p);
        if idem > tol.herm {
            return Err(Error::Structural(format!(
                "projector {j} not idempotent (residual {:.3e})",
                as_f64(idem)
            )));
        }
    }
    let mut sum = CMatrix::<T>::zeros(h, h);
    for p in projectors {
        sum += p;
    }
    let complete = max_abs_diff(&sum, &identity(h));
    if complete > tol.herm {
        return Err(Error::Structural(format!(
            "projectors do not resolve the identity (residual {:.3e})",
            as_f64(complete)
        )));
    }
    for j in 0..projectors.len() {
        for k in (j + 1)..projectors.len() {
            let cross = max_abs(&(&projectors[j] * &projectors[k]));
            if cross > tol.herm {
                return Err(Error::Structural(format!(
                    "projectors {j} and {k} are not orthogonal (residual {:.3e})",
                    as_f64(cross)
                )));
            }
        }
    }

    let mut worst_comm = T::zero();
    for a in model.operators() {
        for p in projectors {
            let r = max_abs(&(p * a - a * p));
            if r > worst_comm {
                worst_comm = r;
            }
        }
    }
    if worst_comm > tol.herm {
        return Err(Error::NotBlockDiagonal {
            residual: as_f64(worst_comm),
        });
    }

    // Isometries: eigenvectors of the Hermitian projector with eigenvalue
    // near 1 span its range.
    let mut isometries = Vec::with_capacity(projectors.len());
    for (j, p) in projectors.iter().enumerate() {
        let se = hermitize(p).symmetric_eigen();
        let mut cols: Vec<usize> = (0..h)
            .filter(|&c| se.eigenvalues[c] > real::<T>(0.5))
            .collect();
        cols.sort_unstable();
        if cols.is_empty() {
            return Err(Error::Structural(format!("projector {j} has empty range")));
        }
        let mut v = CMatrix::<T>::zeros(h, cols.len());
        for (out, &c) in cols.iter().enumerate() {
            v.set_column(out, &se.eigenvectors.column(c));
        }
        // V* V = I by construction; V V* must reproduce P.
        let recon = max_abs_diff(&(&v * dagger(&v)), p);
        if recon > tol.fix {
            return Err(Error::NumericalDegeneracy(format!(
                "projector {j} range extraction residual {:.3e}",
                as_f64(recon)
            )));
        }
        isometries.push(v);
    }

    Ok(BlockDecomposition {
        projectors: projectors.to_vec(),
        isometries,
    })
}

/// Restriction of the walk to block j: operators V_j* A_i V_j on the block's
/// internal dimension. The restricted family is itself a valid walk.
pub fn restrict<T: RealScalar>(
    model: &WalkModel<T>,
    decomposition: &BlockDecomposition<T>,
    j: usize,
    tol: &Tolerances<T>,
) -> Result<WalkModel<T>> {
    let v = decomposition.isometry(j);
    let ops: Vec<CMatrix<T>> = model
        .operators()
        .iter()
        .map(|a| dagger(v) * a * v)
        .collect();
    WalkModel::new(model.lattice_dim(), ops, tol).map_err(|e| {
        Error::Integrity(format!(
            "restricted family of block {j} is not a valid walk: {e}"
        ))
    })
}

/// One-step martingale residuals |sum_i Tr(P_j A_i rho A_i*) - Tr(P_j rho)|
/// per block, by direct summation over outcomes. Zero (to rounding) whenever
/// the projectors commute with the walk; reported as-is otherwise.
pub fn martingale_check<T: RealScalar>(
    model: &WalkModel<T>,
    projectors: &[CMatrix<T>],
    rho: &DensityMatrix<T>,
) -> Vec<T> {
    projectors
        .iter()
        .map(|p| {
            let mut after = Complex::new(T::zero(), T::zero());
            for a in model.operators() {
                after += (p * a * rho.matrix() * dagger(a)).trace();
            }
            let before = (p * rho.matrix()).trace();
            (after - before).modulus()
        })
        .collect()
}

/// Per-block slice of a mixture analysis.
#[derive(Debug, Clone)]
pub struct BlockClt<T: RealScalar> {
    /// Mixture weight Tr(P_j rho_0).
    pub weight: T,
    /// CLT parameters of the restricted walk.
    pub report: CltReport<T>,
    /// Limiting jump-frequency vector (one entry per direction), used as the
    /// classification candidate for this block.
    pub jump_frequencies: DVector<T>,
}

/// Mixture analysis: the walk's limit law is a mixture of per-block
/// Gaussians, weighted by the initial mass in each block.
#[derive(Debug, Clone)]
pub struct MixtureReport<T: RealScalar> {
    pub blocks: Vec<BlockClt<T>>,
    /// Smallest pairwise distance between block drifts.
    pub min_drift_separation: T,
    /// Whether the drifts are pairwise distinct (separation > 1e-8); when
    /// false, drift-based classification is unreliable.
    pub drifts_distinct: bool,
}

/// Run the per-block CLT pipeline and assemble the mixture report.
pub fn mixture_clt<T: RealScalar>(
    model: &WalkModel<T>,
    decomposition: &BlockDecomposition<T>,
    rho0: &DensityMatrix<T>,
    tol: &Tolerances<T>,
) -> Result<MixtureReport<T>> {
    let mut blocks = Vec::with_capacity(decomposition.blocks());
    let mut weight_sum = T::zero();
    for j in 0..decomposition.blocks() {
        let w = (decomposition.projector(j) * rho0.matrix()).trace();
        if w.im.abs() > real(1e-10) {
            return Err(Error::Integrity(format!(
                "block {j} weight has imaginary part {:.3e}",
                as_f64(w.im)
            )));
        }
        let weight = w.re;
        weight_sum += weight;
        let restricted = restrict(model, decomposition, j, tol)?;
        let report = walk_clt(&restricted, tol)?;
        let rho_inf = report.rho_inf.matrix();
        let jump_frequencies = DVector::from_iterator(
            restricted.operators().len(),
            restricted
                .operators()
                .iter()
                .map(|a| (a * rho_inf * dagger(a)).trace().re),
        );
        blocks.push(BlockClt {
            weight,
            report,
            jump_frequencies,
        });
    }
    if (weight_sum - T::one()).abs() > real(1e-10) {
        return Err(Error::Integrity(format!(
            "block weights sum to {:.12}",
            as_f64(weight_sum)
        )));
    }

    let mut min_sep = T::max_value().unwrap_or_else(T::one);
    let n = blocks.len();
    for j in 0..n {
        for k in (j + 1)..n {
            let d = (&blocks[j].report.drift - &blocks[k].report.drift).norm();
            if d < min_sep {
                min_sep = d;
            }
        }
    }
    if n < 2 {
        min_sep = T::zero();
    }
    let drifts_distinct = n < 2 || min_sep > real(1e-8);
    Ok(MixtureReport {
        blocks,
        min_drift_separation: min_sep,
        drifts_distinct,
    })
}
