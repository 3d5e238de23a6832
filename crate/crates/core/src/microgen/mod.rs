//! Periodic short-fiber microstructures: orientation sampling, packing and voxelization.

mod acg;
mod generate;
mod io;
mod voxel;

pub use acg::{
    acg_moments_diag, acg_second_moment, calibrate_acg, match_second_moment, sample_direction,
    validate_orientation_tensor, AcgSampler, MATCH_MAX_ITER, MATCH_TOL,
};
pub use generate::{
    fiber_count, fiber_volume, generate, generate_detailed, min_periodic_axis_distance,
    segment_distance, GenerationReport, MIGRATION_SWEEPS, RSA_RETRIES,
};
pub use io::{read_microstructure, write_microstructure, MicroMeta, Microstructure};
pub use voxel::voxelize;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SymTensor2;

/// Fiber geometry and target statistics. Lengths in μm.
///
/// `length` is the cylindrical segment length; hemispherical caps of radius
/// `diameter / 2` are added at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    #[serde(rename = "length_um")]
    pub length: f64,
    #[serde(rename = "diameter_um")]
    pub diameter: f64,
    #[serde(rename = "min_separation_um")]
    pub min_separation: f64,
    pub volume_fraction: f64,
    /// Second-order orientation tensor, Voigt order.
    pub orientation: SymTensor2,
    /// Corrects each realization's sampled directions so that their second
    /// moment equals `orientation` exactly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub match_orientation: bool,
}

impl FiberSpec {
    /// 100 μm × 10 μm fibers, 2 μm separation, 10 % volume fraction.
    pub fn reference(orientation: SymTensor2) -> Self {
        FiberSpec {
            length: 100.0,
            diameter: 10.0,
            min_separation: 2.0,
            volume_fraction: 0.1,
            orientation,
            match_orientation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter > 0.0 && self.length > self.diameter) {
            return Err(Error::validation("fiber spec needs length > diameter > 0"));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::validation("fiber min_separation must be finite and non-negative"));
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(Error::validation("fiber volume_fraction must lie in (0, 1)"));
        }
        validate_orientation_tensor(&self.orientation)
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }
}

/// Spherocylinder in a periodic cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub center: [f64; 3],
    pub direction: [f64; 3],
    pub half_length: f64,
    pub radius: f64,
}

impl Fiber {
    pub fn center_vec(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    pub fn direction_vec(&self) -> Vector3<f64> {
        Vector3::from(self.direction)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSet {
    /// Cell edge in μm.
    pub cell: f64,
    pub periodic: bool,
    pub fibers: Vec<Fiber>,
}

impl FiberSet {
    pub fn empty(cell: f64) -> Self {
        FiberSet { cell, periodic: true, fibers: Vec::new() }
    }

    /// Analytic volume fraction of the spherocylinders.
    pub fn volume_fraction(&self) -> f64 {
        let v: f64 = self
            .fibers
            .iter()
            .map(|f| fiber_volume(2.0 * f.half_length, f.radius))
            .sum();
        v / self.cell.powi(3)
    }

    /// Smallest periodic surface distance over all pairs, including self-images.
    pub fn min_surface_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.fibers.iter().enumerate() {
            best = best.min(generate::self_image_distance(a, self.cell) - 2.0 * a.radius);
            for b in &self.fibers[i + 1..] {
                let d = min_periodic_axis_distance(a, b, self.cell) - a.radius - b.radius;
                best = best.min(d);
            }
        }
        best
    }
}

/// Voxelized two-phase microstructure on an `n³` grid.
///
/// Voxel `(i, j, k)` has its center at `((i + ½) h, (j + ½) h, (k + ½) h)`
/// and linear index `i + n (j + n k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField {
    pub n: usize,
    /// Voxel edge in μm.
    pub h: f64,
    pub phases: Vec<u8>,
    /// Conductivity per phase id in W/(mK).
    pub conductivities: Vec<f64>,
}

impl PhaseField {
    pub fn new(n: usize, h: f64, phases: Vec<u8>, conductivities: Vec<f64>) -> Result<Self> {
        if n == 0 || phases.len() != n * n * n {
            return Err(Error::validation(format!(
                "phase array has {} entries, expected {}",
                phases.len(),
                n * n * n
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::validation("voxel edge must be positive"));
        }
        if conductivities.is_empty() || conductivities.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::validation("phase conductivities must be strictly positive"));
        }
        if let Some(&p) = phases.iter().find(|&&p| p as usize >= conductivities.len()) {
            return Err(Error::validation(format!("phase id {p} has no conductivity")));
        }
        Ok(PhaseField { n, h, phases, conductivities })
    }

    pub fn homogeneous(n: usize, h: f64, alpha: f64) -> Result<Self> {
        Self::new(n, h, vec![0; n * n * n], vec![alpha])
    }

    pub fn cell(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    /// Per-voxel conductivity.
    pub fn conductivity_field(&self) -> Vec<f64> {
        self.phases.iter().map(|&p| self.conductivities[p as usize]).collect()
    }

    pub fn phase_fraction(&self, phase: u8) -> f64 {
        self.phases.iter().filter(|&&p| p == phase).count() as f64 / self.phases.len() as f64
    }

    /// `(min, max)` phase conductivity.
    pub fn conductivity_range(&self) -> (f64, f64) {
        let present = |id: usize| self.phases.iter().any(|&p| p as usize == id);
        let vals: Vec<f64> = (0..self.conductivities.len())
            .filter(|&i| present(i))
            .map(|i| self.conductivities[i])
            .collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// `(1/N) Σ p ⊗ p` over the fiber directions.
pub fn empirical_orientation(fibers: &FiberSet) -> Result<SymTensor2> {
    if fibers.fibers.is_empty() {
        return Err(Error::validation("empirical orientation of an empty fiber set"));
    }
    let mut a = SymTensor2::ZERO;
    for f in &fibers.fibers {
        let p = f.direction_vec().normalize();
        a += SymTensor2::outer(&p);
    }
    Ok(a * (1.0 / fibers.fibers.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fiber(direction: [f64; 3]) -> Fiber {
        Fiber { center: [0.0; 3], direction, half_length: 1.0, radius: 0.1 }
    }

    #[test]
    fn orientation_of_aligned_fibers() {
        let set = FiberSet { cell: 10.0, periodic: true, fibers: vec![fiber([0.0, 0.0, 1.0]); 3] };
        assert_eq!(empirical_orientation(&set).unwrap(), SymTensor2::diag(0.0, 0.0, 1.0));
        let set = FiberSet {
            cell: 10.0,
            periodic: true,
            fibers: vec![fiber([1.0, 0.0, 0.0]), fiber([0.0, 1.0, 0.0])],
        };
        assert_eq!(empirical_orientation(&set).unwrap(), SymTensor2::diag(0.5, 0.5, 0.0));
        assert!(empirical_orientation(&FiberSet::empty(1.0)).is_err());
    }

    #[test]
    fn phase_field_validation() {
        assert!(PhaseField::new(2, 1.0, vec![0; 8], vec![0.0]).is_err());
        assert!(PhaseField::new(2, 1.0, vec![1; 8], vec![1.0]).is_err());
        assert!(PhaseField::new(2, 1.0, vec![0; 7], vec![1.0]).is_err());
        assert!(PhaseField::new(2, 1.0, vec![0; 8], vec![1.0]).is_ok());
    }
}
