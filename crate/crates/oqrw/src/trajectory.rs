//! Quantum-trajectory unraveling of the walk channel: single-trajectory
//! stepping, reproducible parallel Monte Carlo ensembles, and drift-based
//! trajectory classification.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dagger, scale, CMatrix, DensityMatrix};
use crate::model::{LatticeSite, WalkModel};
use crate::scalar::{as_f64, real, RealScalar};

/// Reproducible RNG stream: one independent ChaCha stream per trajectory.
/// Identical (seed, stream_id) yields bit-identical trajectories regardless
/// of scheduling or worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Walker state along one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryState<T: RealScalar> {
    pub rho: DensityMatrix<T>,
    pub site: LatticeSite,
    pub step: usize,
}

/// Jump history of one trajectory: the direction sequence and per-direction
/// counts (counts sum to the step number).
#[derive(Debug, Clone)]
pub struct JumpRecord {
    pub jumps: Vec<u8>,
    pub counts: Vec<u64>,
}

impl JumpRecord {
    fn new(n_dirs: usize) -> Self {
        JumpRecord {
            jumps: Vec::new(),
            counts: vec![0; n_dirs],
        }
    }

    fn push(&mut self, j: usize) {
        self.jumps.push(j as u8);
        self.counts[j] += 1;
    }

    /// Empirical direction frequencies N_n(j)/n.
    pub fn frequencies<T: RealScalar>(&self) -> DVector<T> {
        let n: u64 = self.counts.iter().sum();
        let n = real::<T>(n.max(1) as f64);
        DVector::from_iterator(
            self.counts.len(),
            self.counts.iter().map(|c| real::<T>(*c as f64) / n),
        )
    }
}

/// Jump distribution at the current internal state: p(j) = Tr(A_j rho A_j*),
/// clamped at zero and renormalized. The sum must sit within 1e-9 of 1.
pub fn jump_probabilities<T: RealScalar>(
    model: &WalkModel<T>,
    rho: &DensityMatrix<T>,
) -> Result<Vec<T>> {
    let mut probs = Vec::with_capacity(model.operators().len());
    let mut total = T::zero();
    for a in model.operators() {
        let tr = (a * rho.matrix() * dagger(a)).trace();
        if tr.im.abs() > real(1e-10) {
            return Err(Error::Integrity(format!(
                "jump probability has imaginary part {:.3e}",
                as_f64(tr.im)
            )));
        }
        let mut p = tr.re;
        if p < T::zero() {
            if p < -real::<T>(1e-12) {
                return Err(Error::Integrity(format!(
                    "jump probability {:.3e} below clamp floor",
                    as_f64(p)
                )));
            }
            p = T::zero();
        }
        total += p;
        probs.push(p);
    }
    if (total - T::one()).abs() > real(1e-9) {
        return Err(Error::Integrity(format!(
            "jump probabilities sum to {:.12}",
            as_f64(total)
        )));
    }
    if total <= T::zero() {
        return Err(Error::Integrity("all jump probabilities vanish".into()));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// One trajectory step: sample a direction by inverse CDF in fixed index
/// order, move the walker, and renormalize the conditioned state to unit
/// trace.
pub fn step<T: RealScalar>(
    state: &TrajectoryState<T>,
    model: &WalkModel<T>,
    rng: &mut ChaCha8Rng,
) -> Result<(TrajectoryState<T>, usize)> {
    let probs = jump_probabilities(model, &state.rho)?;
    let u: f64 = rng.gen();
    let mut chosen = probs.len() - 1;
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += as_f64(*p);
        if u < acc {
            chosen = j;
            break;
        }
    }
    // Guard against landing on a zero-probability tail direction through
    // accumulated rounding: walk back to the last positive entry.
    while probs[chosen] <= T::zero() {
        chosen = chosen
            .checked_sub(1)
            .ok_or_else(|| Error::Integrity("no positive jump probability".into()))?;
    }

    let a = &model.operators()[chosen];
    let conditioned = a * state.rho.matrix() * dagger(a);
    let tr = conditioned.trace().re;
    if tr <= T::zero() {
        return Err(Error::Integrity(
            "conditioned state has nonpositive trace".into(),
        ));
    }
    let rho = DensityMatrix::from_matrix_unchecked(scale(&conditioned, T::one() / tr));
    Ok((
        TrajectoryState {
            rho,
            site: state.site.step(chosen, model.lattice_dim()),
            step: state.step + 1,
        },
        chosen,
    ))
}

/// Everything produced by a single trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryOutcome<T: RealScalar> {
    pub final_state: TrajectoryState<T>,
    pub record: JumpRecord,
    /// Running average (1/n) sum of the post-step internal states; converges
    /// to the invariant state along almost every trajectory.
    pub cesaro_state: DensityMatrix<T>,
}

/// Run one trajectory for `n_steps` steps from (rho0, x0).
pub fn run_trajectory<T: RealScalar>(
    model: &WalkModel<T>,
    rho0: &DensityMatrix<T>,
    x0: &LatticeSite,
    n_steps: usize,
    stream: &RngStream,
) -> Result<TrajectoryOutcome<T>> {
    if n_steps == 0 {
        return Err(Error::Structural("n_steps must be at least 1".into()));
    }
    let mut rng = stream.rng();
    let mut state = TrajectoryState {
        rho: rho0.clone(),
        site: x0.clone(),
        step: 0,
    };
    let mut record = JumpRecord::new(model.operators().len());
    let h = model.hilbert_dim();
    let mut cesaro = CMatrix::<T>::zeros(h, h);
    for _ in 0..n_steps {
        let (next, j) = step(&state, model, &mut rng)?;
        record.push(j);
        cesaro += next.rho.matrix();
        state = next;
    }
    let cesaro = scale(&cesaro, T::one() / real::<T>(n_steps as f64));
    Ok(TrajectoryOutcome {
        final_state: state,
        record,
        cesaro_state: DensityMatrix::from_matrix_unchecked(cesaro),
    })
}

/// Ensemble statistics of the standardized displacement vectors.
#[derive(Debug, Clone)]
pub struct EmpiricalStats<T: RealScalar> {
    pub samples: usize,
    /// Mean of the standardized vectors.
    pub mean: DVector<T>,
    /// Sample covariance (unbiased) of the standardized vectors.
    pub covariance: DMatrix<T>,
    /// Standard errors of the mean, sqrt(diag(covariance)/N).
    pub standard_errors: DVector<T>,
    /// Final-site histograms, one per lattice coordinate.
    pub histograms: Vec<BTreeMap<i64, u64>>,
    /// Ensemble average of the per-trajectory Cesaro states.
    pub cesaro_state: DensityMatrix<T>,
}

/// Monte Carlo ensemble output: statistics plus the raw per-trajectory jump
/// records and final sites (CSV emission, classification).
#[derive(Debug, Clone)]
pub struct MonteCarloRun<T: RealScalar> {
    pub stats: EmpiricalStats<T>,
    pub records: Vec<JumpRecord>,
    pub final_sites: Vec<Vec<i64>>,
}

/// Run `n_traj` independent trajectories and aggregate. When an analytic
/// drift is supplied the statistics describe (X_n - n m)/sqrt(n); otherwise
/// they describe X_n/n. Trajectory i uses stream (base_seed, i); aggregation
/// runs in trajectory-index order, so output is identical for any worker
/// count (0 = library default).
pub fn monte_carlo<T: RealScalar>(
    model: &WalkModel<T>,
    rho0: &DensityMatrix<T>,
    x0: &LatticeSite,
    n_steps: usize,
    n_traj: usize,
    base_seed: u64,
    workers: usize,
    analytic_drift: Option<&DVector<T>>,
) -> Result<MonteCarloRun<T>> {
    if n_traj < 2 {
        return Err(Error::Structural("need at least 2 trajectories".into()));
    }
    let run = |i: usize| -> Result<TrajectoryOutcome<T>> {
        run_trajectory(
            model,
            rho0,
            x0,
            n_steps,
            &RngStream {
                seed: base_seed,
                stream_id: i as u64,
            },
        )
    };
    let outcomes: Vec<TrajectoryOutcome<T>> = if workers == 1 {
        (0..n_traj).map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Structural(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..n_traj)
                .into_par_iter()
                .map(run)
                .collect::<Result<Vec<_>>>()
        })?
    };

    let d = model.lattice_dim();
    let sqrt_n = real::<T>(n_steps as f64).sqrt();
    let inv_n = T::one() / real::<T>(n_steps as f64);
    let standardized: Vec<DVector<T>> = outcomes
        .iter()
        .map(|o| {
            let x = DVector::from_iterator(
                d,
                o.final_state.site.0.iter().zip(&x0.0).map(|(a, b)| real::<T>((a - b) as f64)),
            );
            match analytic_drift {
                Some(m) => (x - m * real::<T>(n_steps as f64)) / sqrt_n,
                None => x * inv_n,
            }
        })
        .collect();

    let n_t = real::<T>(n_traj as f64);
    let mut mean = DVector::<T>::zeros(d);
    for v in &standardized {
        mean += v;
    }
    mean /= n_t;
    let mut cov = DMatrix::<T>::zeros(d, d);
    for v in &standardized {
        let c = v - &mean;
        cov += &c * c.transpose();
    }
    cov /= n_t - T::one();
    let standard_errors =
        DVector::from_iterator(d, (0..d).map(|i| (cov[(i, i)] / n_t).sqrt()));

    let mut histograms = vec![BTreeMap::new(); d];
    for o in &outcomes {
        for (i, x) in o.final_state.site.0.iter().enumerate() {
            *histograms[i].entry(*x).or_insert(0u64) += 1;
        }
    }

    let h = model.hilbert_dim();
    let mut cesaro = CMatrix::<T>::zeros(h, h);
    for o in &outcomes {
        cesaro += o.cesaro_state.matrix();
    }
    let cesaro = DensityMatrix::from_matrix_unchecked(scale(&cesaro, T::one() / n_t));

    let mut records = Vec::with_capacity(n_traj);
    let mut final_sites = Vec::with_capacity(n_traj);
    for o in outcomes {
        final_sites.push(o.final_state.site.0.clone());
        records.push(o.record);
    }

    Ok(MonteCarloRun {
        stats: EmpiricalStats {
            samples: n_traj,
            mean,
            covariance: cov,
            standard_errors,
            histograms,
            cesaro_state: cesaro,
        },
        records,
        final_sites,
    })
}

/// Result of sorting trajectories to the nearest candidate jump-frequency
/// vector.
#[derive(Debug, Clone)]
pub struct Classification<T: RealScalar> {
    /// Per-trajectory candidate index.
    pub labels: Vec<usize>,
    /// Fraction of trajectories assigned to each candidate.
    pub fractions: Vec<T>,
    /// Binomial standard error of each fraction.
    pub standard_errors: Vec<T>,
    /// Set when two candidates sit closer than twice the empirical
    /// frequency noise floor; labels are then unreliable.
    pub ambiguous: bool,
}

/// Assign each trajectory to the candidate frequency vector nearest (in
/// Euclidean distance) to its empirical jump frequencies.
pub fn classify_by_drift<T: RealScalar>(
    records: &[JumpRecord],
    candidates: &[DVector<T>],
) -> Result<Classification<T>> {
    if records.is_empty() || candidates.is_empty() {
        return Err(Error::Structural("empty records or candidate list".into()));
    }
    let k = candidates.len();
    let mut min_sep = T::max_value().unwrap_or_else(T::one);
    for i in 0..k {
        for j in (i + 1)..k {
            let d = (&candidates[i] - &candidates[j]).norm();
            if d < real(1e-8) {
                return Err(Error::Structural(format!(
                    "candidate frequency vectors {i} and {j} coincide"
                )));
            }
            if d < min_sep {
                min_sep = d;
            }
        }
    }

    let mut labels = Vec::with_capacity(records.len());
    let mut counts = vec![0u64; k];
    let mut noise_floor = T::zero();
    for r in records {
        let f = r.frequencies::<T>();
        let n: u64 = r.counts.iter().sum();
        // Multinomial standard deviation of the full frequency vector,
        // bounded by sqrt(sum f_j (1 - f_j) / n).
        let mut var = T::zero();
        for j in 0..f.len() {
            var += f[j] * (T::one() - f[j]);
        }
        let noise = (var / real::<T>(n.max(1) as f64)).sqrt();
        if noise > noise_floor {
            noise_floor = noise;
        }
        let mut best = 0;
        let mut best_dist = (&f - &candidates[0]).norm();
        for (j, cand) in candidates.iter().enumerate().skip(1) {
            let d = (&f - cand).norm();
            if d < best_dist {
                best = j;
                best_dist = d;
            }
        }
        counts[best] += 1;
        labels.push(best);
    }
    let ambiguous = k > 1 && min_sep < real::<T>(2.0) * noise_floor;

    let n = real::<T>(records.len() as f64);
    let mut fractions = Vec::with_capacity(k);
    let mut standard_errors = Vec::with_capacity(k);
    for c in counts {
        let p = real::<T>(c as f64) / n;
        fractions.push(p);
        standard_errors.push((p * (T::one() - p) / n).sqrt());
    }
    Ok(Classification {
        labels,
        fractions,
        standard_errors,
        ambiguous,
    })
}
