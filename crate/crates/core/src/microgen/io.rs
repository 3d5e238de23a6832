//! `<name>.meta.json` + `<name>.phase` file pair.
//!
//! The phase file holds `n³` raw bytes, one phase id per voxel, x fastest,
//! then y, then z.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Fiber, FiberSpec, PhaseField};
use crate::error::{Error, Result};
use crate::{GENERATOR_VERSION, SOLVER_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroMeta {
    pub cell_um: f64,
    pub n: usize,
    pub voxel_um: f64,
    /// W/(mK) per phase id.
    pub conductivities: Vec<f64>,
    #[serde(default)]
    pub fiber_spec: Option<FiberSpec>,
    #[serde(default)]
    pub fibers: Vec<Fiber>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Analytic fiber volume fraction before voxelization.
    #[serde(default)]
    pub analytic_volume_fraction: Option<f64>,
    /// Fiber-phase voxel fraction.
    pub voxel_volume_fraction: f64,
    pub generator_version: String,
    pub solver_version: String,
}

impl MicroMeta {
    /// Metadata for a field with no fiber description.
    pub fn for_field(field: &PhaseField) -> Self {
        MicroMeta {
            cell_um: field.cell(),
            n: field.n,
            voxel_um: field.h,
            conductivities: field.conductivities.clone(),
            fiber_spec: None,
            fibers: Vec::new(),
            seed: None,
            analytic_volume_fraction: None,
            voxel_volume_fraction: field.phase_fraction(1),
            generator_version: GENERATOR_VERSION.to_string(),
            solver_version: SOLVER_VERSION.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Microstructure {
    pub meta: MicroMeta,
    pub field: PhaseField,
}

fn paths(name: &Path) -> (PathBuf, PathBuf) {
    let base = name.as_os_str().to_owned();
    let mut meta = base.clone();
    meta.push(".meta.json");
    let mut phase = base;
    phase.push(".phase");
    (PathBuf::from(meta), PathBuf::from(phase))
}

/// Writes the pair; `name` is the path without extension.
pub fn write_microstructure(name: &Path, micro: &Microstructure) -> Result<()> {
    let (meta_path, phase_path) = paths(name);
    if let Some(dir) = meta_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(&micro.meta).map_err(|e| Error::Json(e.to_string()))?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;
    std::fs::write(&phase_path, &micro.field.phases).map_err(|e| Error::io(&phase_path, e))?;
    Ok(())
}

pub fn read_microstructure(name: &Path) -> Result<Microstructure> {
    let (meta_path, phase_path) = paths(name);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MicroMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Json(format!("{}: {e}", meta_path.display())))?;
    let phases = std::fs::read(&phase_path).map_err(|e| Error::io(&phase_path, e))?;
    if (meta.n as f64 * meta.voxel_um - meta.cell_um).abs() > 1e-9 * meta.cell_um {
        return Err(Error::validation("metadata violates n · voxel_um = cell_um"));
    }
    let field = PhaseField::new(meta.n, meta.voxel_um, phases, meta.conductivities.clone())?;
    Ok(Microstructure { meta, field })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut phases = vec![0u8; 512];
        phases[3] = 1;
        let field = PhaseField::new(8, 0.5, phases, vec![0.2, 1.2]).unwrap();
        let micro = Microstructure { meta: MicroMeta::for_field(&field), field };
        let name = dir.path().join("sub").join("m");
        write_microstructure(&name, &micro).unwrap();
        assert_eq!(std::fs::read(dir.path().join("sub/m.phase")).unwrap().len(), 512);
        assert_eq!(read_microstructure(&name).unwrap(), micro);
    }

    #[test]
    fn truncated_phase_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let field = PhaseField::homogeneous(8, 1.0, 1.0).unwrap();
        let micro = Microstructure { meta: MicroMeta::for_field(&field), field };
        let name = dir.path().join("m");
        write_microstructure(&name, &micro).unwrap();
        std::fs::write(dir.path().join("m.phase"), [0u8; 10]).unwrap();
        assert!(matches!(read_microstructure(&name), Err(Error::Validation(_))));
    }
}
