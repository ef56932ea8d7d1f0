//! Model file schema: JSON with complex entries as [re, im] pairs and
//! operators in row-major layout. Values are pre-evaluated numbers (no
//! expression parsing), so ingestion is bit-exact.

use serde::Deserialize;

use oqrw::matrix::{CMatrix, DensityMatrix};
use oqrw::model::{RecordModel, WalkModel};
use oqrw::{Tolerances64, WalkModel64};

/// Raw file contents before validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: Kind,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Lattice dimension; required for walks, ignored for records.
    #[serde(default)]
    pub lattice_dim: Option<usize>,
    pub hilbert_dim: usize,
    /// Row-major h*h arrays of [re, im] pairs, one per operator.
    pub operators: Vec<Vec<[f64; 2]>>,
    /// Optional initial density matrix, same encoding.
    #[serde(default)]
    pub initial_state: Option<Vec<[f64; 2]>>,
    /// Optional orthogonal projectors (block analysis), same encoding.
    #[serde(default)]
    pub blocks: Option<Vec<Vec<[f64; 2]>>>,
}

/// Validated in-memory model.
pub enum LoadedKind {
    Walk(WalkModel<f64>),
    Record(RecordModel<f64>),
}

pub struct LoadedModel {
    pub kind: LoadedKind,
    pub name: String,
    pub rho0: DensityMatrix<f64>,
    /// True when no initial state was supplied and I/h was substituted.
    pub default_state: bool,
    pub blocks: Option<Vec<CMatrix<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Walk,
    Record,
}

/// Errors split by exit-code class: parse/shape problems are usage errors
/// (exit 2), model-validation failures are domain errors (exit 1).
pub enum LoadError {
    Parse(String),
    Domain(oqrw::Error),
}

impl From<oqrw::Error> for LoadError {
    fn from(e: oqrw::Error) -> Self {
        LoadError::Domain(e)
    }
}

pub fn decode_matrix(entries: &[[f64; 2]], h: usize, what: &str) -> Result<CMatrix<f64>, LoadError> {
    if entries.len() != h * h {
        return Err(LoadError::Parse(format!(
            "{what}: expected {} entries for a {h}x{h} matrix, got {}",
            h * h,
            entries.len()
        )));
    }
    Ok(CMatrix::from_fn(h, h, |r, c| {
        let [re, im] = entries[r * h + c];
        nalgebra::Complex::new(re, im)
    }))
}

pub fn parse_model(text: &str) -> Result<ModelFile, LoadError> {
    serde_json::from_str(text).map_err(|e| {
        LoadError::Parse(format!(
            "model file: {e} (line {}, column {})",
            e.line(),
            e.column()
        ))
    })
}

/// Validate a parsed file into library types. Warnings (currently only the
/// default-state substitution) go to stderr.
pub fn load_model(file: &ModelFile, tol: &Tolerances64) -> Result<LoadedModel, LoadError> {
    let h = file.hilbert_dim;
    if h == 0 {
        return Err(LoadError::Parse("hilbert_dim must be positive".into()));
    }
    let ops: Vec<CMatrix<f64>> = file
        .operators
        .iter()
        .enumerate()
        .map(|(i, entries)| decode_matrix(entries, h, &format!("operator {i}")))
        .collect::<Result<_, _>>()?;

    let kind = match file.kind {
        Kind::Walk => {
            let d = file.lattice_dim.ok_or_else(|| {
                LoadError::Parse("walk models require lattice_dim".into())
            })?;
            if ops.len() != 2 * d {
                return Err(LoadError::Parse(format!(
                    "walk on Z^{d} needs {} operators, got {}",
                    2 * d,
                    ops.len()
                )));
            }
            LoadedKind::Walk(WalkModel::new(d, ops, tol)?)
        }
        Kind::Record => LoadedKind::Record(RecordModel::new(ops, tol)?),
    };

    let (rho0, default_state) = match &file.initial_state {
        Some(entries) => {
            let m = decode_matrix(entries, h, "initial_state")?;
            (DensityMatrix::new(m, tol)?, false)
        }
        None => (DensityMatrix::maximally_mixed(h), true),
    };

    let blocks = match &file.blocks {
        Some(raw) => Some(
            raw.iter()
                .enumerate()
                .map(|(i, entries)| decode_matrix(entries, h, &format!("projector {i}")))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };

    Ok(LoadedModel {
        kind,
        name: file.name.clone(),
        rho0,
        default_state,
        blocks,
    })
}

impl LoadedModel {
    /// The walk view: records are embedded as zero-padded walks where walk
    /// semantics are required.
    pub fn as_walk(&self) -> WalkModel64 {
        match &self.kind {
            LoadedKind::Walk(w) => w.clone(),
            LoadedKind::Record(r) => r.as_walk(),
        }
    }
}
