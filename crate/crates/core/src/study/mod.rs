//! Seeded Monte-Carlo studies of apparent conductivities over realizations and cell sizes.
//!
//! Realization `i` of size index `k` draws its seed from
//! [`realization_seed`]`(master_seed, k, i)`; the self-reference ensemble uses
//! size index `sizes_um.len()`. The solver is serial, so every record depends
//! on its seed alone and aggregation in index order makes outputs independent
//! of the worker count.

mod stats;

pub use stats::{
    ci_halfwidth, empirical_mean, empirical_mu_q, normalized_errors, projected_mean, std_dev,
    t_cdf, t_quantile, Estimates, NormalizedErrors, DEFAULT_ALPHA, LINEARITY_TOL, T_QUANTILE_TOL,
};

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::microgen::{generate, voxelize, FiberSpec};
use crate::seed::realization_seed;
use crate::solver::{apparent_conductivity, SolverConfig};
use crate::tensor::{
    closed_form_proj2, symmetry_residual2, symmetry_residual4, SymTensor2, SymTensor4,
    SymmetryClass, TensorJson, VOIGT_LABELS,
};
use crate::{GENERATOR_VERSION, SOLVER_VERSION};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLES_FILE: &str = "tables.csv";
pub const REFERENCE_RECORDS_FILE: &str = "records_reference.jsonl";

/// Matrix and fiber conductivity in W/(mK).
pub const DEFAULT_CONDUCTIVITIES: [f64; 2] = [0.2, 1.2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub fiber: FiberSpec,
    /// Strictly increasing cell edge lengths in μm.
    pub sizes_um: Vec<f64>,
    #[serde(default = "default_voxel_um")]
    pub voxel_um: f64,
    /// Realizations per size unless overridden by `n_per_size`.
    pub n_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_size: Option<Vec<usize>>,
    pub master_seed: u64,
    #[serde(deserialize_with = "deserialize_symmetry")]
    pub symmetry: SymmetryClass,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// `[matrix, fiber]`.
    #[serde(default = "default_conductivities")]
    pub conductivities: [f64; 2],
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_voxel_um() -> f64 {
    2.0
}

fn default_conductivities() -> [f64; 2] {
    DEFAULT_CONDUCTIVITIES
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Accepts either a class name with canonical axes or the tagged class object.
fn deserialize_symmetry<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SymmetryClass, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Name(String),
        Full(SymmetryClass),
    }
    match Repr::deserialize(d)? {
        Repr::Full(c) => Ok(c),
        Repr::Name(name) => match name.as_str() {
            "isotropic" => Ok(SymmetryClass::Isotropic),
            "cubic" => Ok(SymmetryClass::Cubic),
            "transversely_isotropic" => Ok(SymmetryClass::ti_e3()),
            "orthotropic" => Ok(SymmetryClass::orthotropic_aligned()),
            other => Err(serde::de::Error::custom(format!(
                "unknown symmetry class `{other}` (expected isotropic, cubic, transversely_isotropic or orthotropic)"
            ))),
        },
    }
}

/// Source of the reference tensor for the normalized errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Extra ensemble at the largest size with `factor` times its realizations.
    SelfLargest {
        #[serde(default = "default_factor")]
        factor: usize,
    },
    /// Order-2 tensor JSON file.
    File { path: PathBuf },
    /// No reference: errors are normalized by each size's own projected mean
    /// a11 and the systematic errors are reported as zero.
    None,
}

fn default_factor() -> usize {
    4
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::SelfLargest { factor: default_factor() }
    }
}

impl StudyConfig {
    /// Parses JSON, naming the offending field path on failure.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: StudyConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::validation(format!("study config at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber.validate().map_err(|e| Error::validation(format!("fiber: {e}")))?;
        self.solver.validate().map_err(|e| Error::validation(format!("solver: {e}")))?;
        self.symmetry.validate().map_err(|e| Error::validation(format!("symmetry: {e}")))?;
        if self.sizes_um.is_empty() {
            return Err(Error::validation("sizes_um: at least one size is required"));
        }
        if self.sizes_um.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("sizes_um: sizes must be strictly increasing"));
        }
        if !(self.voxel_um > 0.0 && self.voxel_um.is_finite()) {
            return Err(Error::validation("voxel_um: must be positive"));
        }
        for (k, &l) in self.sizes_um.iter().enumerate() {
            self.voxels(l).map_err(|e| Error::validation(format!("sizes_um[{k}]: {e}")))?;
        }
        if let Some(ns) = &self.n_per_size {
            if ns.len() != self.sizes_um.len() {
                return Err(Error::validation("n_per_size: needs one entry per size"));
            }
        }
        for k in 0..self.sizes_um.len() {
            if self.realizations(k) < 2 {
                return Err(Error::validation(format!(
                    "n_realizations: at least 2 are needed for unbiased estimators (size index {k})"
                )));
            }
        }
        if !self.conductivities.iter().all(|a| *a > 0.0 && a.is_finite()) {
            return Err(Error::validation("conductivities: must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation("alpha: must lie in (0, 1)"));
        }
        if let ReferenceSpec::SelfLargest { factor } = self.reference {
            if factor == 0 {
                return Err(Error::validation("reference.factor: must be positive"));
            }
        }
        Ok(())
    }

    pub fn realizations(&self, size_index: usize) -> usize {
        match &self.n_per_size {
            Some(ns) => ns[size_index],
            None => self.n_realizations,
        }
    }

    /// Voxels per edge; the cell must be an integer multiple of the voxel edge.
    pub fn voxels(&self, cell: f64) -> Result<usize> {
        let n = (cell / self.voxel_um).round();
        if !(n >= 1.0) || (n * self.voxel_um - cell).abs() > 1e-9 * cell {
            return Err(Error::validation(format!(
                "cell {cell} μm is not a multiple of the voxel edge {} μm",
                self.voxel_um
            )));
        }
        Ok(n as usize)
    }
}

/// One realization, stored as a JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub realization: usize,
    pub seed: u64,
    pub apparent: SymTensor2,
    /// `closed_form_proj2(class, apparent)`.
    pub projected: SymTensor2,
    pub fiber_count: usize,
    pub voxel_volume_fraction: f64,
    pub iterations: [usize; 3],
    pub final_residual: [f64; 3],
    pub asymmetry: f64,
}

/// Estimators for one cell size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub size_index: usize,
    pub cell_um: f64,
    pub voxels: usize,
    pub n_realizations: usize,
    /// `vol(Y) = L³` entering μQ.
    pub volume_um3: f64,
    pub mean_volume_fraction: f64,
    pub mean: SymTensor2,
    pub projected_mean: SymTensor2,
    pub std: SymTensor2,
    pub projected_std: SymTensor2,
    pub ci_halfwidth: SymTensor2,
    pub projected_ci_halfwidth: SymTensor2,
    pub t_quantile: f64,
    /// μQ in W²/(m²K²)·μm³, plain Voigt components.
    pub mu_q: SymTensor4,
    pub mu_q_projected_samples: SymTensor4,
    /// `‖μQ − P::μQ‖ / ‖P::μQ‖`; absent when the projection vanishes.
    pub mu_q_residual: Option<f64>,
    /// `‖Q:Ā‖ / ‖P:Ā‖`.
    pub mean_residual: f64,
    pub errors: NormalizedErrors,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub mode: String,
    /// Symmetry-projected tensor used as `A_ref`.
    pub tensor: Option<SymTensor2>,
    /// Unprojected ensemble mean or file contents.
    pub raw: Option<SymTensor2>,
    pub cell_um: Option<f64>,
    pub n_realizations: Option<usize>,
}

/// Contents of `summary.json`. Contains no timing data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub generator_version: String,
    pub solver_version: String,
    pub config: StudyConfig,
    pub reference: ReferenceInfo,
    pub sizes: Vec<SizeStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub summary: StudySummary,
    /// Per size, in realization order.
    pub records: Vec<Vec<SampleRecord>>,
    pub reference_records: Vec<SampleRecord>,
}

/// Generates, voxelizes, solves and projects one realization.
pub fn run_realization(cfg: &StudyConfig, cell: f64, size_index: usize, realization: usize) -> Result<SampleRecord> {
    let seed = realization_seed(cfg.master_seed, size_index as u64, realization as u64);
    let wrap = |e: Error| Error::Study { size_index, realization, source: Box::new(e) };
    let fibers = generate(&cfg.fiber, cell, seed).map_err(wrap)?;
    let field = voxelize(&fibers, cfg.voxels(cell)?, cfg.conductivities).map_err(wrap)?;
    let app = apparent_conductivity(&field, &cfg.solver).map_err(wrap)?;
    let projected = closed_form_proj2(&cfg.symmetry, &app.tensor).map_err(wrap)?;
    log::debug!(
        "size {size_index} realization {realization}: {:.2} s, iterations {:?}",
        app.wall_time_s,
        app.loads.iter().map(|l| l.iterations).collect::<Vec<_>>()
    );
    Ok(SampleRecord {
        realization,
        seed,
        apparent: app.tensor,
        projected,
        fiber_count: fibers.fibers.len(),
        voxel_volume_fraction: field.phase_fraction(1),
        iterations: app.loads.each_ref().map(|l| l.iterations),
        final_residual: app.loads.each_ref().map(|l| *l.residual_history.last().unwrap_or(&0.0)),
        asymmetry: app.asymmetry,
    })
}

/// Runs `count` realizations on the current rayon pool, returned in index order.
/// On failure the lowest failing index is reported, whatever the scheduling.
fn run_ensemble(cfg: &StudyConfig, cell: f64, size_index: usize, count: usize) -> Result<Vec<SampleRecord>> {
    let results: Vec<Result<SampleRecord>> = (0..count)
        .into_par_iter()
        .map(|i| run_realization(cfg, cell, size_index, i))
        .collect();
    results.into_iter().collect()
}

/// Estimators for one size given its records and the normalizing reference.
pub fn size_stats(
    cfg: &StudyConfig,
    size_index: usize,
    records: &[SampleRecord],
    reference: Option<&SymTensor2>,
) -> Result<SizeStats> {
    let cell = cfg.sizes_um[size_index];
    let class = &cfg.symmetry;
    let raw: Vec<SymTensor2> = records.iter().map(|r| r.apparent).collect();
    let proj: Vec<SymTensor2> = records.iter().map(|r| r.projected).collect();
    let vol = cell.powi(3);
    let est = Estimates {
        mean: empirical_mean(&raw)?,
        projected_mean: projected_mean(&raw, class)?,
        std: std_dev(&raw)?,
        projected_std: std_dev(&proj)?,
        ci: ci_halfwidth(&raw, cfg.alpha)?,
        projected_ci: ci_halfwidth(&proj, cfg.alpha)?,
    };
    let mu_q = empirical_mu_q(&raw, vol)?;
    let mu_q_residual = match symmetry_residual4(class, &mu_q) {
        Ok(r) => Some(r),
        Err(Error::Numerical(_)) => None,
        Err(e) => return Err(e),
    };
    let errors = match reference {
        Some(r) => normalized_errors(&est, r, class)?,
        None => {
            let mut e = normalized_errors(&est, &est.projected_mean, class)?;
            e.sys = [0.0; 6];
            e.sys_projected = [0.0; 6];
            e
        }
    };
    Ok(SizeStats {
        size_index,
        cell_um: cell,
        voxels: cfg.voxels(cell)?,
        n_realizations: records.len(),
        volume_um3: vol,
        mean_volume_fraction: records.iter().map(|r| r.voxel_volume_fraction).sum::<f64>() / records.len() as f64,
        mean: est.mean,
        projected_mean: est.projected_mean,
        std: est.std,
        projected_std: est.projected_std,
        ci_halfwidth: est.ci,
        projected_ci_halfwidth: est.projected_ci,
        t_quantile: t_quantile(1.0 - 0.5 * cfg.alpha, records.len() - 1)?,
        mu_q,
        mu_q_projected_samples: empirical_mu_q(&proj, vol)?,
        mu_q_residual,
        mean_residual: symmetry_residual2(class, &est.mean).unwrap_or(0.0),
        errors,
    })
}

/// Refuses to reuse a directory holding a summary unless `force` is set.
pub fn prepare_output_dir(out: &Path, force: bool) -> Result<()> {
    if out.join(SUMMARY_FILE).exists() && !force {
        return Err(Error::validation(format!(
            "{} already holds complete results; pass --force to overwrite",
            out.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

pub fn records_file_name(cell: f64) -> String {
    format!("records_L{cell}.jsonl")
}

/// Runs the study on the current rayon pool. With `out`, each size's records
/// are written before its statistics are computed, followed by
/// `summary.json` and `tables.csv`.
pub fn run_study(cfg: &StudyConfig, out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.sizes_um.len());
    for (k, &cell) in cfg.sizes_um.iter().enumerate() {
        log::info!("size {k}: L = {cell} μm, {} realizations", cfg.realizations(k));
        let recs = run_ensemble(cfg, cell, k, cfg.realizations(k))?;
        if let Some(dir) = out {
            write_records(&dir.join(records_file_name(cell)), &recs)?;
        }
        records.push(recs);
    }

    let mut reference_records = Vec::new();
    let reference = match &cfg.reference {
        ReferenceSpec::SelfLargest { factor } => {
            let k = cfg.sizes_um.len();
            let cell = cfg.sizes_um[k - 1];
            let count = factor * cfg.realizations(k - 1);
            log::info!("reference: L = {cell} μm, {count} realizations");
            reference_records = run_ensemble(cfg, cell, k, count)?;
            if let Some(dir) = out {
                write_records(&dir.join(REFERENCE_RECORDS_FILE), &reference_records)?;
            }
            let raw = empirical_mean(&reference_records.iter().map(|r| r.apparent).collect::<Vec<_>>())?;
            ReferenceInfo {
                mode: "self-largest".into(),
                tensor: Some(closed_form_proj2(&cfg.symmetry, &raw)?),
                raw: Some(raw),
                cell_um: Some(cell),
                n_realizations: Some(count),
            }
        }
        ReferenceSpec::File { path } => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let raw = match TensorJson::parse(&text)? {
                TensorJson::Order2(t) => t,
                TensorJson::Order4(_) => {
                    return Err(Error::validation("reference file must hold an order-2 tensor"))
                }
            };
            ReferenceInfo {
                mode: "file".into(),
                tensor: Some(closed_form_proj2(&cfg.symmetry, &raw)?),
                raw: Some(raw),
                cell_um: None,
                n_realizations: None,
            }
        }
        ReferenceSpec::None => ReferenceInfo {
            mode: "none".into(),
            tensor: None,
            raw: None,
            cell_um: None,
            n_realizations: None,
        },
    };

    let sizes = records
        .iter()
        .enumerate()
        .map(|(k, recs)| size_stats(cfg, k, recs, reference.tensor.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let summary = StudySummary {
        generator_version: GENERATOR_VERSION.to_string(),
        solver_version: SOLVER_VERSION.to_string(),
        config: cfg.clone(),
        reference,
        sizes,
    };
    if let Some(dir) = out {
        write_summary(dir, &summary)?;
        write_tables(&dir.join(TABLES_FILE), &summary)?;
    }
    Ok(StudyResult { summary, records, reference_records })
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Json(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Json(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_summary(dir: &Path, summary: &StudySummary) -> Result<()> {
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Json(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_summary(dir: &Path) -> Result<StudySummary> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json(format!("{}: {e}", path.display())))
}

/// One row per size and Voigt component.
pub fn write_tables(path: &Path, summary: &StudySummary) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Json(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["L", "component", "mean", "std", "sys", "proj-sys", "ran", "proj-ran", "ci"])
        .map_err(csv_err)?;
    for s in &summary.sizes {
        for (c, label) in VOIGT_LABELS.iter().enumerate() {
            let e = &s.errors;
            w.write_record([
                s.cell_um.to_string(),
                label.to_string(),
                s.mean.0[c].to_string(),
                s.std.0[c].to_string(),
                e.sys[c].to_string(),
                e.sys_projected[c].to_string(),
                e.ran[c].to_string(),
                e.ran_projected[c].to_string(),
                e.ci[c].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
