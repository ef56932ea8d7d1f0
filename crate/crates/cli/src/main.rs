//! Command-line front end: model-file ingestion, analysis and simulation
//! subcommands, JSON reports on stdout, CSV/gnuplot data files on disk.
//!
//! Exit codes: 0 success, 1 domain failure (validation or hypothesis),
//! 2 usage or parse error.

mod report;
mod schema;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use oqrw::blocks::{mixture_clt, verify_blocks};
use oqrw::channel::spectral_diagnostics;
use oqrw::clt::{record_clt, walk_clt, CltReport};
use oqrw::exact::SiteDistribution;
use oqrw::model::{validate_kraus, LatticeSite};
use oqrw::trajectory::{classify_by_drift, monte_carlo};
use oqrw::{Tolerances, Tolerances64};

use report::*;
use schema::{LoadError, LoadedKind, LoadedModel};

/// Fixed default seed so runs are reproducible out of the box.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "oqrw", about = "Open quantum random walks: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model file: Kraus normalization and spectral diagnostics.
    Validate {
        model: PathBuf,
        /// Scale factor applied to all default tolerances.
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
    },
    /// Closed-form limit parameters: invariant state, drift, covariance.
    Analyze {
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
    },
    /// Exact site-occupation distribution after a number of steps.
    Exact {
        model: PathBuf,
        /// Number of evolution steps.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Drop blocks whose trace falls below this threshold.
        #[arg(long)]
        prune: Option<f64>,
        /// Memory budget in bytes; a warning is printed when the dense
        /// support bound exceeds it.
        #[arg(long, default_value_t = 1 << 30)]
        budget: u64,
        /// Directory for CSV/gnuplot output.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
    },
    /// Monte Carlo trajectory ensemble with analytic comparison.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Number of trajectories.
        #[arg(long, default_value_t = 10_000)]
        traj: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Worker threads (0 = library default).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
    },
    /// Block decomposition: per-block limit laws and trajectory
    /// classification.
    Blocks {
        model: PathBuf,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        traj: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn domain(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse(m) => CliError::usage(m),
            LoadError::Domain(err) => CliError::domain(err.to_string()),
        }
    }
}

impl From<oqrw::Error> for CliError {
    fn from(e: oqrw::Error) -> Self {
        CliError::domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn tolerances(scale: f64) -> Result<Tolerances64, CliError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CliError::usage("--tol must be a positive finite factor"));
    }
    Ok(Tolerances::scaled(scale))
}

fn read_model(path: &Path, tol: &Tolerances64) -> Result<LoadedModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let file = schema::parse_model(&text)?;
    let loaded = schema::load_model(&file, tol)?;
    if loaded.default_state {
        eprintln!(
            "warning: {} has no initial_state; using the maximally mixed state I/{}",
            path.display(),
            file.hilbert_dim
        );
    }
    Ok(loaded)
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage(format!("serialization: {e}")))?;
    println!("{text}");
    Ok(())
}

fn analyze_report(model: &LoadedModel, tol: &Tolerances64) -> Result<CltReport<f64>, CliError> {
    match &model.kind {
        LoadedKind::Walk(w) => Ok(walk_clt(w, tol)?),
        LoadedKind::Record(r) => Ok(record_clt(r, tol)?),
    }
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Validate { model, tol } => cmd_validate(&model, tolerances(tol)?),
        Cmd::Analyze { model, tol } => cmd_analyze(&model, tolerances(tol)?),
        Cmd::Exact { model, steps, prune, budget, out, tol } => {
            cmd_exact(&model, steps, prune, budget, &out, tolerances(tol)?)
        }
        Cmd::Simulate { model, steps, traj, seed, workers, out, tol } => {
            cmd_simulate(&model, steps, traj, seed, workers, &out, tolerances(tol)?)
        }
        Cmd::Blocks { model, steps, traj, seed, workers, out, tol } => {
            cmd_blocks(&model, steps, traj, seed, workers, &out, tolerances(tol)?)
        }
    }
}

fn cmd_validate(path: &Path, tol: Tolerances64) -> Result<(), CliError> {
    // Decode without constructing the model so an invalid family still gets
    // its residual reported.
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let file = schema::parse_model(&text)?;
    let h = file.hilbert_dim;
    let ops: Vec<_> = file
        .operators
        .iter()
        .enumerate()
        .map(|(i, entries)| schema::decode_matrix(entries, h, &format!("operator {i}")))
        .collect::<Result<_, _>>()?;
    let validation = validate_kraus(&ops, &tol)?;
    let kind = match file.kind {
        schema::Kind::Walk => "walk",
        schema::Kind::Record => "record",
    };
    if !validation.valid {
        eprintln!(
            "model {}: Kraus normalization residual {:e} exceeds tolerance {:e}",
            file.name, validation.residual, tol.norm
        );
        let partial = serde_json::json!({
            "model": file.name,
            "kind": kind,
            "hilbert_dim": h,
            "operators": ops.len(),
            "normalization_residual": validation.residual,
            "valid": false,
        });
        print_json(&partial)?;
        return Err(CliError::domain("model failed validation"));
    }
    let diagnostics = spectral_diagnostics(ops.as_slice(), &tol);
    print_json(&ValidationJson::new(
        &file.name,
        &file.description,
        kind,
        &validation,
        ops.len(),
        &diagnostics,
    ))
}

fn cmd_analyze(path: &Path, tol: Tolerances64) -> Result<(), CliError> {
    let model = read_model(path, &tol)?;
    let report = analyze_report(&model, &tol).map_err(|e| {
        if e.code == 1 {
            CliError::domain(format!(
                "{} (if the walk splits into invariant blocks, run `oqrw blocks`)",
                e.message
            ))
        } else {
            e
        }
    })?;
    print_json(&CltReportJson::from(&model.name, &report))
}

fn write_sites_csv(
    dir: &Path,
    name: &str,
    dist: &SiteDistribution<f64>,
) -> Result<PathBuf, CliError> {
    let d = dist.lattice_dim();
    let mut csv = String::new();
    for i in 0..d {
        let _ = write!(csv, "x{},", i + 1);
    }
    csv.push_str("probability\n");
    for (site, p) in dist.site_probabilities()? {
        for c in &site {
            let _ = write!(csv, "{c},");
        }
        let _ = writeln!(csv, "{p}");
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}_sites.csv"));
    std::fs::write(&path, csv)?;

    // Companion gnuplot script (data-only workflow, no renderer required).
    let gp = if d == 1 {
        format!(
            "set datafile separator ','\nset style fill solid 0.6\n\
             plot '{name}_sites.csv' skip 1 using 1:2 with boxes title 'site probability'\n"
        )
    } else {
        format!(
            "set datafile separator ','\nset view map\n\
             splot '{name}_sites.csv' skip 1 using 1:2:3 with points pointtype 5 \
             palette title 'site probability'\n"
        )
    };
    std::fs::write(dir.join(format!("{name}_sites.gp")), gp)?;
    Ok(path)
}

fn cmd_exact(
    path: &Path,
    steps: usize,
    prune: Option<f64>,
    budget: u64,
    out: &Path,
    tol: Tolerances64,
) -> Result<(), CliError> {
    let model = read_model(path, &tol)?;
    let walk = match &model.kind {
        LoadedKind::Walk(w) => w.clone(),
        LoadedKind::Record(_) => {
            return Err(CliError::domain(
                "exact evolution applies to walk models (records have no lattice)",
            ))
        }
    };
    let d = walk.lattice_dim();
    let h = walk.hilbert_dim() as u64;
    // Dense support bound: (2n+1)^d sites, h^2 complex entries each.
    let sites = (2 * steps as u64 + 1).pow(d as u32);
    let bytes = sites.saturating_mul(h * h * 16);
    if bytes > budget {
        eprintln!(
            "warning: support bound needs up to {bytes} bytes (budget {budget}); \
             consider --prune or a smaller --steps"
        );
    }

    let dist = SiteDistribution::point_mass(&model.rho0, &LatticeSite::origin(d), d)
        .evolve(&walk, steps, prune)?;
    let (mean, cov) = dist.moments()?;
    let csv_path = write_sites_csv(out, &model.name, &dist)?;
    eprintln!("site table written to {}", csv_path.display());

    let n = steps.max(1) as f64;
    let moments = MomentsJson {
        model: model.name.clone(),
        steps,
        mean: real_vector_json(&mean),
        mean_per_step: mean.iter().map(|x| x / n).collect(),
        covariance: real_matrix_json(&cov),
        covariance_per_step: (0..d)
            .map(|i| (0..d).map(|j| cov[(i, j)] / n).collect())
            .collect(),
        support_sites: dist.support_size(),
        pruned_mass: dist.pruned_mass(),
    };
    print_json(&moments)
}

fn cmd_simulate(
    path: &Path,
    steps: usize,
    traj: usize,
    seed: u64,
    workers: usize,
    out: &Path,
    tol: Tolerances64,
) -> Result<(), CliError> {
    let model = read_model(path, &tol)?;
    // Records simulate as their zero-padded walk: the lattice coordinates
    // are then exactly the per-outcome counts.
    let walk = model.as_walk();
    let d = walk.lattice_dim();
    let x0 = LatticeSite::origin(d);

    // Analytic side is optional: simulation still runs when (H1) fails.
    let analytic = analyze_report(&model, &tol).ok();
    let drift = analytic.as_ref().map(|r| r.drift.clone());

    let run = monte_carlo(
        &walk,
        &model.rho0,
        &x0,
        steps,
        traj,
        seed,
        workers,
        drift.as_ref(),
    )?;

    let comparison = analytic.as_ref().map(|r| {
        let n_f = traj as f64;
        let mean_z: Vec<f64> = (0..d)
            .map(|i| {
                let se = run.stats.standard_errors[i];
                if se > 0.0 { run.stats.mean[i] / se } else { 0.0 }
            })
            .collect();
        let var_z: Vec<f64> = (0..d)
            .map(|i| {
                let expect = r.covariance[(i, i)];
                let se = expect.max(1e-12) * (2.0 / (n_f - 1.0)).sqrt();
                (run.stats.covariance[(i, i)] - expect) / se
            })
            .collect();
        ComparisonJson {
            analytic_drift: real_vector_json(&r.drift),
            analytic_covariance: real_matrix_json(&r.covariance),
            mean_z_scores: mean_z,
            variance_z_scores: var_z,
        }
    });

    // Per-trajectory CSV: final site plus jump counts.
    let mut csv = String::new();
    csv.push_str("traj,");
    for i in 0..d {
        let _ = write!(csv, "x{},", i + 1);
    }
    let n_dirs = walk.operators().len();
    for j in 0..n_dirs {
        let _ = write!(csv, "count_{j}");
        csv.push(if j + 1 < n_dirs { ',' } else { '\n' });
    }
    for (t, (site, record)) in run.final_sites.iter().zip(&run.records).enumerate() {
        let _ = write!(csv, "{t},");
        for c in site {
            let _ = write!(csv, "{c},");
        }
        for (j, c) in record.counts.iter().enumerate() {
            let _ = write!(csv, "{c}");
            csv.push(if j + 1 < n_dirs { ',' } else { '\n' });
        }
    }
    std::fs::create_dir_all(out)?;
    let csv_path = out.join(format!("{}_trajectories.csv", model.name));
    std::fs::write(&csv_path, csv)?;

    // Final-site histograms, one CSV block per coordinate.
    let mut hist = String::from("coordinate,site,count\n");
    for (i, counts) in run.stats.histograms.iter().enumerate() {
        for (site, count) in counts {
            let _ = writeln!(hist, "{},{site},{count}", i + 1);
        }
    }
    std::fs::write(out.join(format!("{}_histogram.csv", model.name)), hist)?;
    let gp = format!(
        "set datafile separator ','\nset style fill solid 0.6\n\
         plot '{}_histogram.csv' skip 1 using 2:($1==1?$3:1/0) with boxes \
         title 'coordinate 1 final sites'\n",
        model.name
    );
    std::fs::write(out.join(format!("{}_histogram.gp", model.name)), gp)?;
    eprintln!("trajectory table written to {}", csv_path.display());

    print_json(&SimulateJson {
        model: model.name.clone(),
        empirical: EmpiricalJson::from(&run.stats, steps, seed, drift.is_some()),
        comparison,
    })
}

fn cmd_blocks(
    path: &Path,
    steps: usize,
    traj: usize,
    seed: u64,
    workers: usize,
    out: &Path,
    tol: Tolerances64,
) -> Result<(), CliError> {
    let model = read_model(path, &tol)?;
    let walk = match &model.kind {
        LoadedKind::Walk(w) => w.clone(),
        LoadedKind::Record(_) => {
            return Err(CliError::domain("block analysis is defined for walk models"))
        }
    };
    let projectors = model
        .blocks
        .as_ref()
        .ok_or_else(|| CliError::usage("model file has no `blocks` entry"))?;
    let decomposition = verify_blocks(&walk, projectors, &tol)?;
    let mixture = mixture_clt(&walk, &decomposition, &model.rho0, &tol)?;
    if !mixture.drifts_distinct {
        eprintln!(
            "warning: block drifts are not pairwise distinct \
             (min separation {:e}); classification disabled",
            mixture.min_drift_separation
        );
    }
    let mut json = MixtureJson::from(&model.name, &mixture);

    if mixture.drifts_distinct && decomposition.blocks() > 1 {
        let run = monte_carlo(
            &walk,
            &model.rho0,
            &LatticeSite::origin(walk.lattice_dim()),
            steps,
            traj,
            seed,
            workers,
            None,
        )?;
        let candidates: Vec<DVector<f64>> = mixture
            .blocks
            .iter()
            .map(|b| b.jump_frequencies.clone())
            .collect();
        let classification = classify_by_drift(&run.records, &candidates)?;
        if classification.ambiguous {
            eprintln!("warning: candidate frequencies sit inside sampling noise; labels unreliable");
        }
        let mut csv = String::from("traj,label\n");
        for (t, label) in classification.labels.iter().enumerate() {
            let _ = writeln!(csv, "{t},{label}");
        }
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join(format!("{}_classification.csv", model.name)), csv)?;

        json.classification = Some(ClassificationJson {
            trajectories: traj,
            steps,
            seed,
            fractions: classification.fractions,
            standard_errors: classification.standard_errors,
            expected_weights: mixture.blocks.iter().map(|b| b.weight).collect(),
            ambiguous: classification.ambiguous,
        });
    }
    print_json(&json)
}
