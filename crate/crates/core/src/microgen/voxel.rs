use nalgebra::Vector3;

use super::{FiberSet, PhaseField};
use crate::error::{Error, Result};

/// Marks voxels whose center lies within `radius` of a fiber axis segment
/// (periodically) as phase 1. `conductivities = [matrix, fiber]`.
pub fn voxelize(fibers: &FiberSet, n: usize, conductivities: [f64; 2]) -> Result<PhaseField> {
    if n < 8 {
        return Err(Error::validation(format!("voxel grid needs n >= 8 (got {n})")));
    }
    let cell = fibers.cell;
    let h = cell / n as f64;
    let mut phases = vec![0u8; n * n * n];
    let ni = n as i64;
    for f in &fibers.fibers {
        let c = f.center_vec();
        let d = f.direction_vec();
        let r2 = f.radius * f.radius;
        // unwrapped bounding box in voxel indices, mapped back modulo n
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..3 {
            let ext = f.half_length * d[k].abs() + f.radius;
            lo[k] = ((c[k] - ext) / h - 0.5).floor() as i64;
            hi[k] = ((c[k] + ext) / h - 0.5).ceil() as i64;
        }
        for k in lo[2]..=hi[2] {
            let z = (k as f64 + 0.5) * h;
            for j in lo[1]..=hi[1] {
                let y = (j as f64 + 0.5) * h;
                for i in lo[0]..=hi[0] {
                    let p = Vector3::new((i as f64 + 0.5) * h, y, z) - c;
                    let s = p.dot(&d).clamp(-f.half_length, f.half_length);
                    if (p - d * s).norm_squared() <= r2 {
                        let idx = i.rem_euclid(ni) + ni * (j.rem_euclid(ni) + ni * k.rem_euclid(ni));
                        phases[idx as usize] = 1;
                    }
                }
            }
        }
    }
    PhaseField::new(n, h, phases, conductivities.to_vec())
}
