use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::microgen::PhaseField;

/// Largest grid accepted by [`dense_oracle`].
pub const DENSE_MAX_N: usize = 12;

/// Solves the same rotated-grid system as the FFT solver by assembling the
/// stiffness `K = Σ_j G_jᵀ diag(a) G_j` and applying its eigen pseudo-inverse.
/// Returns the mean flux `⟨a (ξ + ∇φ)⟩`.
pub fn dense_oracle(field: &PhaseField, xi: [f64; 3]) -> Result<[f64; 3]> {
    let n = field.n;
    if n > DENSE_MAX_N {
        return Err(Error::validation(format!("dense oracle supports n <= {DENSE_MAX_N} (got {n})")));
    }
    let nn = n * n * n;
    let a = field.conductivity_field();
    let c = 1.0 / (4.0 * field.h);
    let node = |i: usize, j: usize, k: usize| (i % n) + n * ((j % n) + n * (k % n));

    // G_j as a list of (node, coefficient) per voxel
    let mut grads: [Vec<Vec<(usize, f64)>>; 3] = Default::default();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut rows: [Vec<(usize, f64)>; 3] = Default::default();
                for s in 0..2 {
                    for t in 0..2 {
                        rows[0].push((node(i + 1, j + s, k + t), c));
                        rows[0].push((node(i, j + s, k + t), -c));
                        rows[1].push((node(i + s, j + 1, k + t), c));
                        rows[1].push((node(i + s, j, k + t), -c));
                        rows[2].push((node(i + s, j + t, k + 1), c));
                        rows[2].push((node(i + s, j + t, k), -c));
                    }
                }
                for (comp, r) in rows.into_iter().enumerate() {
                    grads[comp].push(r);
                }
            }
        }
    }

    let mut kmat = DMatrix::<f64>::zeros(nn, nn);
    let mut rhs = DVector::<f64>::zeros(nn);
    for comp in 0..3 {
        for (v, row) in grads[comp].iter().enumerate() {
            for &(p, cp) in row {
                rhs[p] -= cp * a[v] * xi[comp];
                for &(q, cq) in row {
                    kmat[(p, q)] += cp * a[v] * cq;
                }
            }
        }
    }

    let eig = SymmetricEigen::new(kmat);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = 1e-10 * lmax;
    let proj = eig.eigenvectors.transpose() * &rhs;
    let mut coef = DVector::<f64>::zeros(nn);
    for m in 0..nn {
        let l = eig.eigenvalues[m];
        if l > cut {
            coef[m] = proj[m] / l;
        } else if proj[m].abs() > 1e-8 * rhs.norm().max(1e-300) {
            return Err(Error::numerical("right-hand side has a component in the stiffness nullspace"));
        }
    }
    let phi = &eig.eigenvectors * coef;

    let mut flux = [0.0; 3];
    for comp in 0..3 {
        for (v, row) in grads[comp].iter().enumerate() {
            let g: f64 = xi[comp] + row.iter().map(|&(p, cp)| cp * phi[p]).sum::<f64>();
            flux[comp] += a[v] * g;
        }
        flux[comp] /= nn as f64;
    }
    if !flux.iter().all(|f| f.is_finite()) {
        return Err(Error::numerical("dense oracle produced a non-finite flux"));
    }
    Ok(flux)
}
