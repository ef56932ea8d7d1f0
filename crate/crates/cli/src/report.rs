//! Serializable views of library results. Complex entries serialize as
//! [re, im]; matrices as row-major nested arrays; all floats full precision.

use serde::Serialize;

use oqrw::blocks::MixtureReport;
use oqrw::channel::SpectralDiagnostics;
use oqrw::clt::{CltMode, CltReport};
use oqrw::matrix::CMatrix;
use oqrw::model::KrausValidation;
use oqrw::trajectory::EmpiricalStats;
use nalgebra::{DMatrix, DVector};

pub fn complex_matrix_json(m: &CMatrix<f64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn real_matrix_json(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

pub fn real_vector_json(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Serialize)]
pub struct DiagnosticsJson {
    pub eigenvalues: Vec<[f64; 2]>,
    pub fixed_space_dim: usize,
    pub peripheral: Vec<[f64; 2]>,
    pub spectral_radius: f64,
}

impl DiagnosticsJson {
    pub fn from(d: &SpectralDiagnostics<f64>) -> Self {
        DiagnosticsJson {
            eigenvalues: d.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            fixed_space_dim: d.fixed_space_dim,
            peripheral: d.peripheral.iter().map(|z| [z.re, z.im]).collect(),
            spectral_radius: d.spectral_radius,
        }
    }
}

#[derive(Serialize)]
pub struct ValidationJson {
    pub model: String,
    pub description: String,
    pub kind: String,
    pub hilbert_dim: usize,
    pub operators: usize,
    pub normalization_residual: f64,
    pub valid: bool,
    pub diagnostics: DiagnosticsJson,
}

impl ValidationJson {
    pub fn new(
        model: &str,
        description: &str,
        kind: &str,
        v: &KrausValidation<f64>,
        n_ops: usize,
        diagnostics: &SpectralDiagnostics<f64>,
    ) -> Self {
        ValidationJson {
            model: model.to_string(),
            description: description.to_string(),
            kind: kind.to_string(),
            hilbert_dim: v.dim,
            operators: n_ops,
            normalization_residual: v.residual,
            valid: v.valid,
            diagnostics: DiagnosticsJson::from(diagnostics),
        }
    }
}

#[derive(Serialize)]
pub struct CltReportJson {
    pub model: String,
    pub mode: String,
    pub dim: usize,
    pub invariant_state: Vec<Vec<[f64; 2]>>,
    pub drift: Vec<f64>,
    pub poisson_operators: Vec<Vec<Vec<[f64; 2]>>>,
    pub poisson_residuals: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub diagnostics: DiagnosticsJson,
}

impl CltReportJson {
    pub fn from(model: &str, r: &CltReport<f64>) -> Self {
        CltReportJson {
            model: model.to_string(),
            mode: match r.mode {
                CltMode::Walk => "walk".into(),
                CltMode::Record => "record".into(),
            },
            dim: r.dim,
            invariant_state: complex_matrix_json(r.rho_inf.matrix()),
            drift: real_vector_json(&r.drift),
            poisson_operators: r.poisson_ops.iter().map(complex_matrix_json).collect(),
            poisson_residuals: r.poisson_residuals.clone(),
            covariance: real_matrix_json(&r.covariance),
            diagnostics: DiagnosticsJson::from(&r.diagnostics),
        }
    }
}

#[derive(Serialize)]
pub struct MomentsJson {
    pub model: String,
    pub steps: usize,
    pub mean: Vec<f64>,
    pub mean_per_step: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_per_step: Vec<Vec<f64>>,
    pub support_sites: usize,
    pub pruned_mass: f64,
}

#[derive(Serialize)]
pub struct EmpiricalJson {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    /// "standardized" when an analytic drift was available ((X-nm)/sqrt n),
    /// otherwise "per_step" (X/n).
    pub scaling: String,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub standard_errors: Vec<f64>,
    pub cesaro_state: Vec<Vec<[f64; 2]>>,
}

impl EmpiricalJson {
    pub fn from(s: &EmpiricalStats<f64>, steps: usize, seed: u64, standardized: bool) -> Self {
        EmpiricalJson {
            samples: s.samples,
            steps,
            seed,
            scaling: if standardized { "standardized" } else { "per_step" }.into(),
            mean: real_vector_json(&s.mean),
            covariance: real_matrix_json(&s.covariance),
            standard_errors: real_vector_json(&s.standard_errors),
            cesaro_state: complex_matrix_json(s.cesaro_state.matrix()),
        }
    }
}

/// Analytic-vs-empirical comparison: per-entry z-scores.
#[derive(Serialize)]
pub struct ComparisonJson {
    pub analytic_drift: Vec<f64>,
    pub analytic_covariance: Vec<Vec<f64>>,
    /// (empirical standardized mean) / SE, per coordinate.
    pub mean_z_scores: Vec<f64>,
    /// (empirical - analytic) covariance deviation over the large-sample
    /// standard error of a Gaussian variance estimate, diagonal entries.
    pub variance_z_scores: Vec<f64>,
}

#[derive(Serialize)]
pub struct SimulateJson {
    pub model: String,
    pub empirical: EmpiricalJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonJson>,
}

#[derive(Serialize)]
pub struct BlockJson {
    pub weight: f64,
    pub dim: usize,
    pub drift: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub invariant_state: Vec<Vec<[f64; 2]>>,
    pub jump_frequencies: Vec<f64>,
}

#[derive(Serialize)]
pub struct MixtureJson {
    pub model: String,
    pub blocks: Vec<BlockJson>,
    pub min_drift_separation: f64,
    pub drifts_distinct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationJson>,
}

#[derive(Serialize)]
pub struct ClassificationJson {
    pub trajectories: usize,
    pub steps: usize,
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub expected_weights: Vec<f64>,
    pub ambiguous: bool,
}

impl MixtureJson {
    pub fn from(model: &str, r: &MixtureReport<f64>) -> Self {
        MixtureJson {
            model: model.to_string(),
            blocks: r
                .blocks
                .iter()
                .map(|b| BlockJson {
                    weight: b.weight,
                    dim: b.report.rho_inf.dim(),
                    drift: real_vector_json(&b.report.drift),
                    covariance: real_matrix_json(&b.report.covariance),
                    invariant_state: complex_matrix_json(b.report.rho_inf.matrix()),
                    jump_frequencies: real_vector_json(&b.jump_frequencies),
                })
                .collect(),
            min_drift_separation: r.min_drift_separation,
            drifts_distinct: r.drifts_distinct,
            classification: None,
        }
    }
}
