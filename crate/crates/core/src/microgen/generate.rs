use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{calibrate_acg, match_second_moment, AcgSampler, Fiber, FiberSet, FiberSpec};
use crate::error::{Error, Result};
use crate::seed::splitmix64;

/// Position retries per fiber during random sequential adsorption.
pub const RSA_RETRIES: usize = 5_000;
/// Upper bound on migration sweeps over all overlapping pairs.
pub const MIGRATION_SWEEPS: usize = 200;
/// Largest admissible deviation of the analytic volume fraction from the target.
pub const VF_TOLERANCE: f64 = 0.005;

/// Spherocylinder volume `π r² ℓ + (4/3) π r³`.
pub fn fiber_volume(cylinder_length: f64, radius: f64) -> f64 {
    PI * radius * radius * cylinder_length + 4.0 / 3.0 * PI * radius.powi(3)
}

/// `round(vf · L³ / V_fiber)`.
pub fn fiber_count(spec: &FiberSpec, cell: f64) -> usize {
    (spec.volume_fraction * cell.powi(3) / fiber_volume(spec.length, spec.radius())).round() as usize
}

/// Minimal distance between segments `a ± ha·da` and `b ± hb·db`, with the
/// vector from the closest point on `a` to the closest point on `b`.
pub fn segment_distance(
    a: &Vector3<f64>,
    da: &Vector3<f64>,
    ha: f64,
    b: &Vector3<f64>,
    db: &Vector3<f64>,
    hb: f64,
) -> (f64, Vector3<f64>) {
    // closest points of the segments, clamped parametrization s ∈ [-ha, ha], t ∈ [-hb, hb]
    let r = a - b;
    let e = da.dot(db);
    let f = db.dot(&r);
    let c = da.dot(&r);
    let denom = 1.0 - e * e;
    let mut s = if denom > 1e-14 { ((e * f - c) / denom).clamp(-ha, ha) } else { 0.0 };
    let mut t = e * s + f;
    if t < -hb {
        t = -hb;
        s = (e * t - c).clamp(-ha, ha);
    } else if t > hb {
        t = hb;
        s = (e * t - c).clamp(-ha, ha);
    }
    let v = (b + db * t) - (a + da * s);
    (v.norm(), v)
}

fn wrap_delta(d: f64, cell: f64) -> f64 {
    d - cell * (d / cell).round()
}

/// Minimum over the 27 periodic images of `b` of the axis distance to `a`,
/// with the separating vector. `same` skips the zero shift.
fn periodic_pair(a: &Fiber, b: &Fiber, cell: f64, same: bool) -> (f64, Vector3<f64>) {
    let ca = a.center_vec();
    let da = a.direction_vec();
    let db = b.direction_vec();
    let base = Vector3::new(
        wrap_delta(b.center[0] - a.center[0], cell),
        wrap_delta(b.center[1] - a.center[1], cell),
        wrap_delta(b.center[2] - a.center[2], cell),
    );
    let reach = a.half_length + b.half_length;
    let mut best = (f64::INFINITY, Vector3::zeros());
    // zero shift first: it is usually the nearest image and tightens the cut below
    for (sx, sy, sz) in std::iter::once((0, 0, 0)).chain(
        (0..27).map(|k| (k % 3 - 1, k / 3 % 3 - 1, k / 9 - 1)).filter(|&s| s != (0, 0, 0)),
    ) {
        if same && (sx, sy, sz) == (0, 0, 0) {
            continue;
        }
        let shift = Vector3::new(sx as f64, sy as f64, sz as f64) * cell;
        let offset = base + shift;
        // segments within `reach` of their centers cannot come closer than this
        if offset.norm() - reach >= best.0 {
            continue;
        }
        let d = segment_distance(&ca, &da, a.half_length, &(ca + offset), &db, b.half_length);
        if d.0 < best.0 {
            best = d;
        }
    }
    best
}

/// Periodic axis-to-axis distance between two distinct fibers.
pub fn min_periodic_axis_distance(a: &Fiber, b: &Fiber, cell: f64) -> f64 {
    periodic_pair(a, b, cell, false).0
}

/// Diagnostics of one generation run.
#[derive(Clone, Debug)]
pub struct GenerationReport {
    pub fibers: FiberSet,
    pub target_count: usize,
    /// Fibers inserted at their least-overlap position after the RSA budget ran out.
    pub rsa_fallbacks: usize,
    pub migration_sweeps: usize,
}

/// RSA with per-fiber retries, followed by pairwise migration. Deterministic in `seed`.
pub fn generate(spec: &FiberSpec, cell: f64, seed: u64) -> Result<FiberSet> {
    generate_detailed(spec, cell, seed).map(|r| r.fibers)
}

pub fn generate_detailed(spec: &FiberSpec, cell: f64, seed: u64) -> Result<GenerationReport> {
    spec.validate()?;
    let r = spec.radius();
    if !(cell >= spec.length + spec.diameter + spec.min_separation) {
        return Err(Error::validation(format!(
            "cell edge {cell} μm cannot hold a {}×{} μm fiber with {} μm separation",
            spec.length, spec.diameter, spec.min_separation
        )));
    }
    let count = fiber_count(spec, cell);
    let target_vf = count as f64 * fiber_volume(spec.length, r) / cell.powi(3);
    if (target_vf - spec.volume_fraction).abs() > VF_TOLERANCE {
        return Err(Error::Generation {
            message: format!(
                "{count} whole fibers cannot meet volume fraction {} in a {cell} μm cell",
                spec.volume_fraction
            ),
            achieved_vf: target_vf,
        });
    }
    let sigma = calibrate_acg(&spec.orientation)?;
    let sampler = AcgSampler::new(&sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let required = 2.0 * r + spec.min_separation;

    let mut directions: Vec<Vector3<f64>> = (0..count).map(|_| sampler.sample(&mut rng)).collect();
    if spec.match_orientation && !match_second_moment(&mut directions, &spec.orientation) {
        log::warn!("orientation matching skipped: sampled directions are degenerate");
    }

    let mut fibers: Vec<Fiber> = Vec::with_capacity(count);
    let mut fallbacks = 0;
    for p in &directions {
        let mut best: Option<(f64, Fiber)> = None;
        for _ in 0..RSA_RETRIES {
            let cand = Fiber {
                center: [rng.random::<f64>() * cell, rng.random::<f64>() * cell, rng.random::<f64>() * cell],
                direction: [p[0], p[1], p[2]],
                half_length: 0.5 * spec.length,
                radius: r,
            };
            let bound = best.as_ref().map_or(f64::INFINITY, |(o, _)| *o);
            let mut overlap = (required - periodic_pair(&cand, &cand, cell, true).0).max(0.0);
            for f in &fibers {
                if overlap >= bound {
                    break;
                }
                overlap += (required - periodic_pair(&cand, f, cell, false).0).max(0.0);
            }
            if best.as_ref().is_none_or(|(o, _)| overlap < *o) {
                best = Some((overlap, cand));
            }
            if overlap == 0.0 {
                break;
            }
        }
        let (overlap, f) = best.expect("at least one retry");
        if overlap > 0.0 {
            fallbacks += 1;
        }
        fibers.push(f);
    }

    let sweeps = migrate(&mut fibers, cell, required);
    let set = FiberSet { cell, periodic: true, fibers };
    let violations = overlapping_pairs(&set.fibers, cell, required);
    if violations > 0 {
        let achieved = feasible_subset_fraction(&set, required);
        return Err(Error::Generation {
            message: format!(
                "{violations} fiber pairs still overlap after {MIGRATION_SWEEPS} migration sweeps"
            ),
            achieved_vf: achieved,
        });
    }
    Ok(GenerationReport { fibers: set, target_count: count, rsa_fallbacks: fallbacks, migration_sweeps: sweeps })
}

fn overlapping_pairs(fibers: &[Fiber], cell: f64, required: f64) -> usize {
    let mut n = 0;
    for (i, a) in fibers.iter().enumerate() {
        if periodic_pair(a, a, cell, true).0 < required {
            n += 1;
        }
        for b in &fibers[i + 1..] {
            if periodic_pair(a, b, cell, false).0 < required {
                n += 1;
            }
        }
    }
    n
}

/// Moves each overlapping pair apart along its separating vector by half the
/// violation per fiber. Returns the sweep count used.
fn migrate(fibers: &mut [Fiber], cell: f64, required: f64) -> usize {
    for sweep in 0..MIGRATION_SWEEPS {
        let mut moved = false;
        for i in 0..fibers.len() {
            for j in i + 1..fibers.len() {
                let (d, v) = periodic_pair(&fibers[i], &fibers[j], cell, false);
                if d >= required {
                    continue;
                }
                moved = true;
                let dir = if d > 1e-12 { v / d } else { pair_direction(i, j) };
                // slight overshoot so the pair ends strictly separated
                let step = 0.5 * (required - d) * (1.0 + 1e-3) + 1e-9;
                for k in 0..3 {
                    fibers[i].center[k] = (fibers[i].center[k] - step * dir[k]).rem_euclid(cell);
                    fibers[j].center[k] = (fibers[j].center[k] + step * dir[k]).rem_euclid(cell);
                }
            }
        }
        if !moved {
            return sweep;
        }
    }
    MIGRATION_SWEEPS
}

/// Deterministic pseudo-random unit vector for coincident axes.
fn pair_direction(i: usize, j: usize) -> Vector3<f64> {
    let mut h = splitmix64(((i as u64) << 32) ^ j as u64);
    loop {
        let mut c = [0.0; 3];
        for x in c.iter_mut() {
            h = splitmix64(h);
            *x = (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        }
        let v = Vector3::from(c);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Volume fraction of a greedy overlap-free subset.
fn feasible_subset_fraction(set: &FiberSet, required: f64) -> f64 {
    let mut kept: Vec<&Fiber> = Vec::new();
    for f in &set.fibers {
        if periodic_pair(f, f, set.cell, true).0 < required {
            continue;
        }
        if kept.iter().all(|k| periodic_pair(k, f, set.cell, false).0 >= required) {
            kept.push(f);
        }
    }
    kept.iter().map(|f| fiber_volume(2.0 * f.half_length, f.radius)).sum::<f64>() / set.cell.powi(3)
}

pub(crate) fn self_image_distance(f: &Fiber, cell: f64) -> f64 {
    periodic_pair(f, f, cell, true).0
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_segments() {
        let (d, _) = segment_distance(
            &Vector3::zeros(),
            &Vector3::x(),
            1.0,
            &Vector3::new(0.5, 2.0, 0.0),
            &Vector3::x(),
            1.0,
        );
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn crossing_and_endpoint_segments() {
        let (d, _) = segment_distance(
            &Vector3::zeros(),
            &Vector3::x(),
            1.0,
            &Vector3::new(0.0, 0.0, 3.0),
            &Vector3::y(),
            1.0,
        );
        assert!((d - 3.0).abs() < 1e-14);
        // collinear, separated by a gap of 1
        let (d, _) = segment_distance(
            &Vector3::zeros(),
            &Vector3::x(),
            1.0,
            &Vector3::new(3.0, 0.0, 0.0),
            &Vector3::x(),
            1.0,
        );
        assert!((d - 1.0).abs() < 1e-14);
        // T-configuration: endpoint of b closest to interior of a
        let (d, _) = segment_distance(
            &Vector3::zeros(),
            &Vector3::x(),
            2.0,
            &Vector3::new(0.5, 3.0, 0.0),
            &Vector3::y(),
            1.0,
        );
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reference_fiber_volume() {
        assert!((fiber_volume(100.0, 5.0) - 8377.58).abs() < 0.01);
        let spec = FiberSpec::reference(crate::tensor::SymTensor2::identity() * (1.0 / 3.0));
        assert_eq!(fiber_count(&spec, 128.0), 25);
    }

    #[test]
    fn periodic_wrap_finds_near_image() {
        let a = Fiber { center: [1.0, 5.0, 5.0], direction: [0.0, 0.0, 1.0], half_length: 1.0, radius: 0.1 };
        let b = Fiber { center: [9.5, 5.0, 5.0], direction: [0.0, 0.0, 1.0], half_length: 1.0, radius: 0.1 };
        assert!((min_periodic_axis_distance(&a, &b, 10.0) - 1.5).abs() < 1e-14);
        assert!((self_image_distance(&a, 10.0) - 8.0).abs() < 1e-14);
    }
}
