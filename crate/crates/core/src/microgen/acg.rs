//! Angular central Gaussian (ACG) orientation distribution.
//!
//! `p = B z / |B z|` with `z ~ N(0, I)` and `Σ = B Bᵀ`. The density on the
//! sphere is proportional to `(pᵀ Σ⁻¹ p)^(-3/2)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_interval;
use crate::tensor::SymTensor2;

/// Calibration step size.
pub const CALIBRATION_STEP: f64 = 0.5;
pub const CALIBRATION_MAX_ITER: usize = 10_000;
/// Stop when every second-moment entry matches the target to this value.
pub const CALIBRATION_TOL: f64 = 1e-10;
/// Eigenvalues of the target in `(RANK_TOL, EIG_FLOOR)` are raised to `EIG_FLOOR`.
pub const EIG_FLOOR: f64 = 1e-6;
/// Eigenvalues at or below this make the target rank deficient.
pub const RANK_TOL: f64 = 1e-12;
const QUAD_POINTS: usize = 64;

/// Checks symmetric PSD with unit trace to 1e-10.
pub fn validate_orientation_tensor(a: &SymTensor2) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::validation("orientation tensor has non-finite entries"));
    }
    if (a.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!(
            "orientation tensor must have unit trace (trace {})",
            a.trace()
        )));
    }
    let lo = a.eigenvalues()[0];
    if lo < -1e-10 {
        return Err(Error::validation(format!(
            "orientation tensor must be positive semidefinite (smallest eigenvalue {lo:.3e})"
        )));
    }
    Ok(())
}

/// ACG second moments `E[p_i²]` for a diagonal `Σ = diag(s)`, by tensor
/// Gauss-Legendre quadrature over one octant of the sphere.
pub fn acg_moments_diag(s: [f64; 3]) -> [f64; 3] {
    let (theta, wt) = gauss_legendre_interval(QUAD_POINTS, 0.0, FRAC_PI_2);
    let (phi, wp) = gauss_legendre_interval(QUAD_POINTS, 0.0, FRAC_PI_2);
    let inv = [1.0 / s[0], 1.0 / s[1], 1.0 / s[2]];
    let mut m = [0.0; 3];
    let mut total = 0.0;
    for (t, w1) in theta.iter().zip(&wt) {
        let (st, ct) = t.sin_cos();
        for (f, w2) in phi.iter().zip(&wp) {
            let (sf, cf) = f.sin_cos();
            let p = [st * cf, st * sf, ct];
            let q = inv[0] * p[0] * p[0] + inv[1] * p[1] * p[1] + inv[2] * p[2] * p[2];
            let w = w1 * w2 * st * q.powf(-1.5);
            total += w;
            for k in 0..3 {
                m[k] += w * p[k] * p[k];
            }
        }
    }
    m.map(|x| x / total)
}

/// ACG second-moment tensor `E[p ⊗ p]` for a full `Σ`.
pub fn acg_second_moment(sigma: &SymTensor2) -> Result<SymTensor2> {
    let (vals, vecs) = sigma.eigen();
    if !(vals[0] > 0.0) {
        return Err(Error::validation("ACG matrix must be positive definite"));
    }
    let m = acg_moments_diag(vals);
    Ok(rotate_diag(&vecs, m))
}

fn rotate_diag(vecs: &Matrix3<f64>, d: [f64; 3]) -> SymTensor2 {
    let m = vecs * Matrix3::from_diagonal(&Vector3::from(d)) * vecs.transpose();
    SymTensor2::from_matrix_symmetrized(&m)
}

/// Finds `Σ` (unit trace) whose ACG second moment equals `target`.
///
/// Fixed-point iteration `Σ ← Σ + η (target − M(Σ))` in the eigenframe of the target.
pub fn calibrate_acg(target: &SymTensor2) -> Result<SymTensor2> {
    validate_orientation_tensor(target)?;
    let (mut t, vecs) = target.eigen();
    if t[0] <= RANK_TOL {
        return Err(Error::validation(format!(
            "orientation tensor is rank deficient (smallest eigenvalue {:.3e})",
            t[0]
        )));
    }
    for x in t.iter_mut() {
        *x = x.max(EIG_FLOOR);
    }
    let tr: f64 = t.iter().sum();
    t = t.map(|x| x / tr);

    let mut s = t;
    let mut err = f64::INFINITY;
    for _ in 0..CALIBRATION_MAX_ITER {
        let m = acg_moments_diag(s);
        err = (0..3).map(|k| (t[k] - m[k]).abs()).fold(0.0, f64::max);
        if err < CALIBRATION_TOL {
            return Ok(rotate_diag(&vecs, s));
        }
        for k in 0..3 {
            // multiplicative guard keeps Σ positive definite
            s[k] = (s[k] + CALIBRATION_STEP * (t[k] - m[k])).max(0.5 * s[k]);
        }
        let tr: f64 = s.iter().sum();
        s = s.map(|x| x / tr);
    }
    Err(Error::Calibration(format!(
        "ACG calibration did not converge after {CALIBRATION_MAX_ITER} iterations (max moment error {err:.3e})"
    )))
}

/// Direction sampler for a fixed `Σ`.
#[derive(Clone, Debug)]
pub struct AcgSampler {
    b: Matrix3<f64>,
}

impl AcgSampler {
    /// `B = V diag(√λ)` from the eigen-decomposition of `Σ`.
    pub fn new(sigma: &SymTensor2) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::validation("ACG matrix has non-finite entries"));
        }
        let (vals, vecs) = sigma.eigen();
        let scale = vals[2].abs().max(1e-300);
        if vals[0] < -1e-12 * scale || !(vals[2] > 0.0) {
            return Err(Error::validation(format!(
                "ACG matrix must be positive semidefinite (eigenvalues {vals:?})"
            )));
        }
        let sq = Vector3::new(vals[0].max(0.0).sqrt(), vals[1].max(0.0).sqrt(), vals[2].sqrt());
        Ok(AcgSampler { b: vecs * Matrix3::from_diagonal(&sq) })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        loop {
            let z = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            let p = self.b * z;
            let n = p.norm();
            if n > 1e-300 {
                return p / n;
            }
        }
    }
}

/// Iterations allowed for [`match_second_moment`].
pub const MATCH_MAX_ITER: usize = 200;
/// Max-entry tolerance of [`match_second_moment`].
pub const MATCH_TOL: f64 = 1e-12;

fn sym_power(a: &SymTensor2, power: f64) -> Matrix3<f64> {
    let (vals, vecs) = a.eigen();
    let d = Vector3::new(vals[0].powf(power), vals[1].powf(power), vals[2].powf(power));
    vecs * Matrix3::from_diagonal(&d) * vecs.transpose()
}

/// Maps `pᵢ ↦ T pᵢ / ‖T pᵢ‖` with `T = A^{1/2} Â^{-1/2}` until the empirical
/// second moment `Â` equals the target `A` (eigenvalues floored at
/// [`EIG_FLOOR`]). `T` commutes with every symmetry of `A`, so symmetric
/// ensembles stay symmetric. Returns `false` and leaves the directions
/// untouched when `Â` is (nearly) singular or the iteration stalls.
pub fn match_second_moment(dirs: &mut [Vector3<f64>], target: &SymTensor2) -> bool {
    if dirs.len() < 3 {
        return false;
    }
    let (vals, vecs) = target.eigen();
    let floored = vals.map(|v| v.max(EIG_FLOOR));
    let tr: f64 = floored.iter().sum();
    let goal_m = vecs * Matrix3::from_diagonal(&Vector3::from(floored.map(|v| v / tr))) * vecs.transpose();
    let goal = SymTensor2::from_matrix_symmetrized(&goal_m);
    let root = sym_power(&goal, 0.5);
    let mut work = dirs.to_vec();
    let n = work.len() as f64;
    for _ in 0..MATCH_MAX_ITER {
        let emp = work.iter().fold(SymTensor2::ZERO, |a, p| a + SymTensor2::outer(p)) * (1.0 / n);
        if emp.max_abs_diff(&goal) <= MATCH_TOL {
            dirs.copy_from_slice(&work);
            return true;
        }
        if emp.eigenvalues()[0] <= RANK_TOL {
            return false;
        }
        let t = root * sym_power(&emp, -0.5);
        for p in work.iter_mut() {
            let q = t * *p;
            *p = q / q.norm();
        }
    }
    false
}

/// Draws one direction from the ACG distribution with matrix `Σ`.
pub fn sample_direction<R: Rng + ?Sized>(sigma: &SymTensor2, rng: &mut R) -> Result<Vector3<f64>> {
    Ok(AcgSampler::new(sigma)?.sample(rng))
}
