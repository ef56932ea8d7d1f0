//! Exact, non-stochastic evolution of the full lattice state
//! rho = sum_i rho_i (x) |i><i|: one channel application per step moves each
//! block along every direction, giving exact site-occupation probabilities.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{dagger, CMatrix, DensityMatrix};
use crate::model::{LatticeSite, WalkModel};
use crate::scalar::{as_f64, real, RealScalar};

/// Sparse site-indexed decomposition of the lattice state. Each block is an
/// unnormalized positive operator whose trace is the occupation probability
/// of that site; traces sum to one (minus any mass removed by pruning).
#[derive(Debug, Clone)]
pub struct SiteDistribution<T: RealScalar> {
    blocks: BTreeMap<Vec<i64>, CMatrix<T>>,
    lattice_dim: usize,
    hilbert_dim: usize,
    step_count: usize,
    /// Total probability mass removed by pruning so far.
    pruned_mass: T,
}

fn conservation_tol<T: RealScalar>() -> T {
    let floor = real::<T>(1e-12);
    let eps = T::default_epsilon() * real::<T>(100.0);
    if eps > floor {
        eps
    } else {
        floor
    }
}

impl<T: RealScalar> SiteDistribution<T> {
    /// Point mass: the walker sits at `site` with internal state `rho`.
    pub fn point_mass(rho: &DensityMatrix<T>, site: &LatticeSite, lattice_dim: usize) -> Self {
        assert_eq!(site.dim(), lattice_dim, "site dimension mismatch");
        let mut blocks = BTreeMap::new();
        blocks.insert(site.0.clone(), rho.matrix().clone());
        SiteDistribution {
            blocks,
            lattice_dim,
            hilbert_dim: rho.dim(),
            step_count: 0,
            pruned_mass: T::zero(),
        }
    }

    pub fn lattice_dim(&self) -> usize {
        self.lattice_dim
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn pruned_mass(&self) -> T {
        self.pruned_mass
    }

    /// Number of sites carrying a block.
    pub fn support_size(&self) -> usize {
        self.blocks.len()
    }

    /// Deterministically ordered view of the blocks.
    pub fn blocks(&self) -> impl Iterator<Item = (&Vec<i64>, &CMatrix<T>)> {
        self.blocks.iter()
    }

    /// Sum of all block traces plus pruned mass; stays 1 for all time.
    pub fn total_mass(&self) -> T {
        let mut total = self.pruned_mass;
        for b in self.blocks.values() {
            total += b.trace().re;
        }
        total
    }

    /// One application of the walk channel: rho'_i = sum_j A_j rho_{i-e_j} A_j*.
    /// Summation order per target block is the operator order, so results do
    /// not depend on scheduling. `prune` drops result blocks whose trace falls
    /// below the threshold (mass is accounted, not renormalized away).
    pub fn evolve_step(&self, model: &WalkModel<T>, prune: Option<T>) -> Result<Self> {
        if model.hilbert_dim() != self.hilbert_dim {
            return Err(Error::DimensionMismatch(format!(
                "model acts on C^{}, blocks are {}x{}",
                model.hilbert_dim(),
                self.hilbert_dim,
                self.hilbert_dim
            )));
        }
        if model.lattice_dim() != self.lattice_dim {
            return Err(Error::DimensionMismatch(format!(
                "model lattice dimension {} vs distribution {}",
                model.lattice_dim(),
                self.lattice_dim
            )));
        }
        let d = self.lattice_dim;
        let ops = model.operators();

        let mut targets: BTreeSet<Vec<i64>> = BTreeSet::new();
        for site in self.blocks.keys() {
            for j in 0..ops.len() {
                targets.insert(shifted(site, j, d, 1));
            }
        }

        let h = self.hilbert_dim;
        let mut new_blocks = BTreeMap::new();
        let mut pruned = self.pruned_mass;
        for target in targets {
            let mut acc = CMatrix::<T>::zeros(h, h);
            for (j, a) in ops.iter().enumerate() {
                // Source site is the target stepped backwards along e_j.
                let source = shifted(&target, j, d, -1);
                if let Some(rho) = self.blocks.get(&source) {
                    acc += a * rho * dagger(a);
                }
            }
            match prune {
                Some(threshold) if acc.trace().re < threshold => {
                    pruned += acc.trace().re;
                }
                _ => {
                    new_blocks.insert(target, acc);
                }
            }
        }

        let next = SiteDistribution {
            blocks: new_blocks,
            lattice_dim: d,
            hilbert_dim: h,
            step_count: self.step_count + 1,
            pruned_mass: pruned,
        };
        let drift = (next.total_mass() - self.total_mass()).abs();
        if drift > conservation_tol::<T>() {
            return Err(Error::Integrity(format!(
                "trace not conserved by evolution step: drift {:.3e}",
                as_f64(drift)
            )));
        }
        Ok(next)
    }

    /// Evolve `n` steps.
    pub fn evolve(&self, model: &WalkModel<T>, n: usize, prune: Option<T>) -> Result<Self> {
        let mut dist = self.clone();
        for _ in 0..n {
            dist = dist.evolve_step(model, prune)?;
        }
        Ok(dist)
    }

    /// Occupation probability of each site, in sorted site order. Checks
    /// nonnegativity and that the probabilities sum to the carried mass.
    pub fn site_probabilities(&self) -> Result<Vec<(Vec<i64>, T)>> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut total = T::zero();
        for (site, block) in &self.blocks {
            let tr = block.trace();
            if tr.im.abs() > real(1e-12) {
                return Err(Error::Integrity(format!(
                    "block trace has imaginary part {:.3e}",
                    as_f64(tr.im)
                )));
            }
            if tr.re < -real::<T>(1e-12) {
                return Err(Error::Integrity(format!(
                    "negative occupation probability {:.3e}",
                    as_f64(tr.re)
                )));
            }
            total += tr.re;
            out.push((site.clone(), tr.re));
        }
        let expected = T::one() - self.pruned_mass;
        if (total - expected).abs() > conservation_tol::<T>() {
            return Err(Error::Integrity(format!(
                "probabilities sum to {:.12}, expected {:.12}",
                as_f64(total),
                as_f64(expected)
            )));
        }
        Ok(out)
    }

    /// Exact mean and covariance of the site distribution. After n steps
    /// mean/n approaches the drift and covariance/n the limit covariance,
    /// giving a deterministic convergence check.
    pub fn moments(&self) -> Result<(DVector<T>, DMatrix<T>)> {
        let d = self.lattice_dim;
        let probs = self.site_probabilities()?;
        let mut norm = T::zero();
        let mut mean = DVector::<T>::zeros(d);
        let mut second = DMatrix::<T>::zeros(d, d);
        for (site, p) in &probs {
            norm += *p;
            for i in 0..d {
                let xi = real::<T>(site[i] as f64);
                mean[i] += *p * xi;
                for j in 0..d {
                    let xj = real::<T>(site[j] as f64);
                    second[(i, j)] += *p * xi * xj;
                }
            }
        }
        if norm <= T::zero() {
            return Err(Error::Integrity("distribution carries no mass".into()));
        }
        // Normalize in case pruning removed mass.
        mean /= norm;
        second /= norm;
        let cov = second - &mean * mean.transpose();
        Ok((mean, cov))
    }
}

/// Site plus or minus the direction-j step (sign = +1 or -1).
fn shifted(site: &[i64], j: usize, d: usize, sign: i64) -> Vec<i64> {
    let mut out = site.to_vec();
    if j < d {
        out[j] += sign;
    } else {
        out[j - d] -= sign;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::identity;
    use crate::model::{bc_walk, oqrw_2d, trivial_walk};
    use nalgebra::Complex;

    fn point_start(h0_excited: bool) -> DensityMatrix<f64> {
        // diag(1,0) or I/2
        if h0_excited {
            let mut m = CMatrix::<f64>::zeros(2, 2);
            m[(0, 0)] = Complex::new(1.0, 0.0);
            DensityMatrix::with_default_tol(m).unwrap()
        } else {
            DensityMatrix::maximally_mixed(2)
        }
    }

    fn bc_distribution(n: usize) -> SiteDistribution<f64> {
        let model = bc_walk::<f64>();
        let dist = SiteDistribution::point_mass(&point_start(true), &LatticeSite::origin(1), 1);
        dist.evolve(&model, n, None).unwrap()
    }

    fn probs_as_map(dist: &SiteDistribution<f64>) -> BTreeMap<i64, f64> {
        dist.site_probabilities()
            .unwrap()
            .into_iter()
            .map(|(s, p)| (s[0], p))
            .collect()
    }

    #[test]
    fn first_four_steps_match_exact_table() {
        let tables: [&[(i64, f64)]; 4] = [
            &[(-1, 1.0 / 3.0), (1, 2.0 / 3.0)],
            &[(-2, 1.0 / 9.0), (0, 3.0 / 9.0), (2, 5.0 / 9.0)],
            &[(-3, 1.0 / 27.0), (-1, 5.0 / 27.0), (1, 11.0 / 27.0), (3, 10.0 / 27.0)],
            &[
                (-4, 1.0 / 81.0),
                (-2, 10.0 / 81.0),
                (0, 27.0 / 81.0),
                (2, 26.0 / 81.0),
                (4, 17.0 / 81.0),
            ],
        ];
        for (n, table) in tables.iter().enumerate() {
            let probs = probs_as_map(&bc_distribution(n + 1));
            assert_eq!(probs.len(), table.len(), "support size at n = {}", n + 1);
            for (site, expect) in table.iter() {
                assert!(
                    (probs[site] - expect).abs() < 1e-12,
                    "n = {}, site {site}: {} vs {expect}",
                    n + 1,
                    probs[site]
                );
            }
        }
    }

    #[test]
    fn initial_distribution_is_point_mass() {
        let probs = probs_as_map(&bc_distribution(0));
        assert_eq!(probs.len(), 1);
        assert!((probs[&0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_channel_translates_deterministically() {
        let ops = vec![identity::<f64>(2), CMatrix::<f64>::zeros(2, 2)];
        let model = WalkModel::with_default_tol(1, ops).unwrap();
        let dist = SiteDistribution::point_mass(&point_start(false), &LatticeSite::origin(1), 1)
            .evolve(&model, 7, None)
            .unwrap();
        let probs = probs_as_map(&dist);
        assert!((probs[&7] - 1.0).abs() < 1e-12);
        // Zero blocks are kept (no pruning by default) but carry no mass.
        for (site, p) in probs {
            if site != 7 {
                assert!(p.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn trivial_walk_goes_straight_right() {
        let model = trivial_walk::<f64>(0.5);
        let dist = SiteDistribution::point_mass(&point_start(true), &LatticeSite::origin(1), 1)
            .evolve(&model, 10, None)
            .unwrap();
        let probs = probs_as_map(&dist);
        assert!((probs[&10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_of_point_mass_are_zero() {
        let dist = bc_distribution(0);
        let (mean, cov) = dist.moments().unwrap();
        assert!(mean[0].abs() < 1e-15);
        assert!(cov[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn mean_after_four_steps() {
        // sum i * p(i) over the n = 4 row: (-4 - 20 + 0 + 52 + 68)/81 = 96/81.
        let (mean, _) = bc_distribution(4).moments().unwrap();
        assert!((mean[0] - 96.0 / 81.0).abs() < 1e-12);
    }

    #[test]
    fn variance_per_step_converges() {
        let (mean, cov) = bc_distribution(200).moments().unwrap();
        let n = 200.0;
        // Drift is zero but finite-n mean is not; only the rate matters.
        assert!((mean[0] / n).abs() < 0.05);
        assert!((cov[(0, 0)] / n - 8.0 / 9.0).abs() <= 0.02);
    }

    #[test]
    fn support_parity_and_radius() {
        let dist = bc_distribution(5);
        for (site, _) in dist.blocks() {
            assert!(site[0].abs() <= 5);
            assert_eq!((site[0] + 5) % 2, 0, "parity violated at {}", site[0]);
        }
        assert!(dist.support_size() <= 11);
    }

    #[test]
    fn evolution_commutes_with_translation() {
        let model = bc_walk::<f64>();
        let rho = point_start(false);
        let at = |origin: i64| {
            SiteDistribution::point_mass(&rho, &LatticeSite(vec![origin]), 1)
                .evolve(&model, 3, None)
                .unwrap()
        };
        let base = probs_as_map(&at(0));
        let moved = probs_as_map(&at(9));
        assert_eq!(base.len(), moved.len());
        for (site, p) in base {
            assert!((moved[&(site + 9)] - p).abs() < 1e-14);
        }
    }

    #[test]
    fn two_dimensional_evolution_conserves_mass() {
        let model = oqrw_2d::<f64>();
        let dist = SiteDistribution::point_mass(&point_start(false), &LatticeSite::origin(2), 2)
            .evolve(&model, 6, None)
            .unwrap();
        assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        assert!(dist.support_size() <= 13 * 13);
        // L1 ball of radius n.
        for (site, _) in dist.blocks() {
            assert!(site[0].abs() + site[1].abs() <= 6);
        }
    }

    #[test]
    fn pruning_accounts_for_dropped_mass() {
        let model = bc_walk::<f64>();
        let dist = SiteDistribution::point_mass(&point_start(true), &LatticeSite::origin(1), 1)
            .evolve(&model, 30, Some(1e-6))
            .unwrap();
        assert!(dist.pruned_mass() > 0.0);
        assert!(dist.pruned_mass() < 1e-3);
        // Remaining blocks still pass the consistency checks.
        let probs = dist.site_probabilities().unwrap();
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        assert!((total + dist.pruned_mass() - 1.0).abs() < 1e-12);
        // Moments renormalize over the surviving mass.
        let (_, cov) = dist.moments().unwrap();
        assert!((cov[(0, 0)] / 30.0 - 8.0 / 9.0).abs() < 0.1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = oqrw_2d::<f64>();
        let dist = SiteDistribution::point_mass(&point_start(true), &LatticeSite::origin(1), 1);
        assert!(dist.evolve_step(&model, None).is_err());
    }
}
