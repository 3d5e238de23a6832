use std::f64::consts::TAU;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::Fft3;
use crate::error::{Error, Result};
use crate::microgen::PhaseField;
use crate::tensor::SymTensor2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative residual in the preconditioner norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Reference conductivity; `None` uses the midpoint of the phase range.
    pub reference: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-8, max_iter: 5_000, reference: None }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::validation(format!("solver tol must lie in (0, 1) (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("solver max_iter must be positive"));
        }
        if let Some(a0) = self.reference {
            if !(a0 > 0.0 && a0.is_finite()) {
                return Err(Error::validation("solver reference conductivity must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadDiagnostics {
    pub iterations: usize,
    /// Relative preconditioned residual, entry 0 being the initial 1.
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorSolution {
    /// `⟨a (ξ + ∇φ)⟩` over voxels.
    pub flux: [f64; 3],
    /// `⟨(ξ + ∇φ) · a (ξ + ∇φ)⟩`.
    pub energy: f64,
    /// Voxel-centered gradient `ξ + ∇φ`, one array per component.
    pub gradient: [Vec<f64>; 3],
    pub diagnostics: LoadDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApparentResult {
    /// Symmetrized `(A + Aᵀ)/2`.
    pub tensor: SymTensor2,
    /// Column `j` is the mean flux for the load `e_j`.
    pub raw: [[f64; 3]; 3],
    /// `‖A − Aᵀ‖ / ‖A‖` before symmetrization.
    pub asymmetry: f64,
    /// `e_j · A e_j` recomputed from the energy of load `j`.
    pub energies: [f64; 3],
    pub loads: [LoadDiagnostics; 3],
    pub wall_time_s: f64,
}

/// Per-axis factors of the rotated-grid gradient symbol.
struct Symbol {
    /// `ω − 1`.
    diff: Vec<Complex64>,
    /// `1 + ω`.
    avg: Vec<Complex64>,
    scale: f64,
}

impl Symbol {
    fn new(n: usize, h: f64) -> Self {
        let w: Vec<Complex64> = (0..n).map(|m| Complex64::from_polar(1.0, TAU * m as f64 / n as f64)).collect();
        Symbol {
            diff: w.iter().map(|z| z - 1.0).collect(),
            avg: w.iter().map(|z| z + 1.0).collect(),
            scale: 1.0 / (4.0 * h),
        }
    }

    /// `(D1, D2, D3)` at frequency `(kx, ky, kz)`.
    #[inline]
    fn at(&self, kx: usize, ky: usize, kz: usize) -> [Complex64; 3] {
        let (dx, dy, dz) = (self.diff[kx], self.diff[ky], self.diff[kz]);
        let (px, py, pz) = (self.avg[kx], self.avg[ky], self.avg[kz]);
        let s = self.scale;
        [dx * py * pz * s, px * dy * pz * s, px * py * dz * s]
    }
}

/// Rotated staggered-grid conductivity solver for one phase field.
///
/// The potential lives at voxel corners and its gradient at voxel centers,
/// where the conductivity is defined. PCG runs on the half spectrum of the
/// potential with the reference-medium preconditioner `1 / (α₀ |D|²)`.
pub struct CellSolver {
    n: usize,
    a: Vec<f64>,
    a_hat: Vec<Complex64>,
    symbol: Symbol,
    precond: Vec<f64>,
    fft: Fft3,
    cfg: SolverConfig,
    real: Vec<f64>,
    tmp: Vec<Complex64>,
}

impl CellSolver {
    pub fn new(field: &PhaseField, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = field.n;
        let a = field.conductivity_field();
        let (lo, hi) = field.conductivity_range();
        let a0 = cfg.reference.unwrap_or(0.5 * (lo + hi));
        let mut fft = Fft3::new(n);
        let mut a_hat = vec![Complex64::default(); fft.spectrum_len()];
        let mut buf = a.clone();
        fft.forward(&mut buf, &mut a_hat);
        let symbol = Symbol::new(n, field.h);
        let nxh = n / 2 + 1;
        let mut precond = vec![0.0; fft.spectrum_len()];
        for kz in 0..n {
            for ky in 0..n {
                for kx in 0..nxh {
                    let d = symbol.at(kx, ky, kz);
                    let m2: f64 = d.iter().map(|z| z.norm_sqr()).sum();
                    // structural nullspace: zero frequency and modes with two Nyquist indices
                    if m2 > 1e-12 * symbol.scale * symbol.scale {
                        precond[kx + nxh * (ky + n * kz)] = 1.0 / (a0 * m2);
                    }
                }
            }
        }
        let len = fft.spectrum_len();
        Ok(CellSolver {
            n,
            a,
            a_hat,
            symbol,
            precond,
            fft,
            cfg: cfg.clone(),
            real: vec![0.0; n * n * n],
            tmp: vec![Complex64::default(); len],
        })
    }

    fn dot(&self, x: &[Complex64], y: &[Complex64]) -> f64 {
        let nxh = self.n / 2 + 1;
        let mut s = 0.0;
        for (row_x, row_y) in x.chunks_exact(nxh).zip(y.chunks_exact(nxh)) {
            for kx in 0..nxh {
                s += self.fft.weight(kx) * (row_x[kx].conj() * row_y[kx]).re;
            }
        }
        s
    }

    /// `out = D^H F a F⁻¹ D x`.
    fn apply(&mut self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let nxh = n / 2 + 1;
        out.iter_mut().for_each(|v| *v = Complex64::default());
        for comp in 0..3 {
            let mut idx = 0;
            for kz in 0..n {
                for ky in 0..n {
                    for kx in 0..nxh {
                        self.tmp[idx] = self.symbol.at(kx, ky, kz)[comp] * x[idx];
                        idx += 1;
                    }
                }
            }
            self.fft.inverse(&mut self.tmp, &mut self.real);
            for (g, a) in self.real.iter_mut().zip(&self.a) {
                *g *= a;
            }
            self.fft.forward(&mut self.real, &mut self.tmp);
            let mut idx = 0;
            for kz in 0..n {
                for ky in 0..n {
                    for kx in 0..nxh {
                        out[idx] += self.symbol.at(kx, ky, kz)[comp].conj() * self.tmp[idx];
                        idx += 1;
                    }
                }
            }
        }
    }

    /// Solves the corrector problem for the mean gradient `xi`.
    pub fn solve(&mut self, xi: [f64; 3]) -> Result<CorrectorSolution> {
        let n = self.n;
        let nxh = n / 2 + 1;
        let len = self.fft.spectrum_len();
        let mut b = vec![Complex64::default(); len];
        let mut idx = 0;
        for kz in 0..n {
            for ky in 0..n {
                for kx in 0..nxh {
                    let d = self.symbol.at(kx, ky, kz);
                    let s = d[0].conj() * xi[0] + d[1].conj() * xi[1] + d[2].conj() * xi[2];
                    b[idx] = -s * self.a_hat[idx];
                    idx += 1;
                }
            }
        }
        let mut x = vec![Complex64::default(); len];
        let mut r = b;
        let mut z: Vec<Complex64> = r.iter().zip(&self.precond).map(|(v, m)| v * m).collect();
        let mut p = z.clone();
        let mut ap = vec![Complex64::default(); len];
        let mut rz = self.dot(&r, &z);
        let rz0 = rz;
        let mut history = vec![1.0];
        if !rz0.is_finite() {
            return Err(Error::numerical("non-finite right-hand side"));
        }
        let mut iterations = 0;
        // a vanishing right-hand side means the affine field already solves the problem
        if rz0 > 0.0 {
            loop {
                if iterations >= self.cfg.max_iter {
                    return Err(Error::Solver {
                        iterations,
                        last_residual: *history.last().unwrap_or(&1.0),
                        residual_history: history,
                    });
                }
                self.apply(&p, &mut ap);
                let pap = self.dot(&p, &ap);
                if !(pap.is_finite() && pap > 0.0) {
                    return Err(Error::numerical(format!(
                        "conjugate-gradient curvature {pap:e} at iteration {iterations}"
                    )));
                }
                let alpha = rz / pap;
                for k in 0..len {
                    x[k] += p[k] * alpha;
                    r[k] -= ap[k] * alpha;
                    z[k] = r[k] * self.precond[k];
                }
                let rz_new = self.dot(&r, &z);
                iterations += 1;
                let res = (rz_new.max(0.0) / rz0).sqrt();
                if !res.is_finite() {
                    return Err(Error::numerical(format!("non-finite residual at iteration {iterations}")));
                }
                history.push(res);
                if res <= self.cfg.tol {
                    break;
                }
                let beta = rz_new / rz;
                rz = rz_new;
                for k in 0..len {
                    p[k] = z[k] + p[k] * beta;
                }
            }
        }

        let mut gradient: [Vec<f64>; 3] = Default::default();
        let mut flux = [0.0; 3];
        let mut energy = 0.0;
        let nn = (n * n * n) as f64;
        for comp in 0..3 {
            let mut idx = 0;
            for kz in 0..n {
                for ky in 0..n {
                    for kx in 0..nxh {
                        self.tmp[idx] = self.symbol.at(kx, ky, kz)[comp] * x[idx];
                        idx += 1;
                    }
                }
            }
            let mut g = vec![0.0; n * n * n];
            self.fft.inverse(&mut self.tmp, &mut g);
            let mut f = 0.0;
            let mut e = 0.0;
            for (gv, a) in g.iter_mut().zip(&self.a) {
                *gv += xi[comp];
                f += a * *gv;
                e += a * *gv * *gv;
            }
            flux[comp] = f / nn;
            energy += e / nn;
            gradient[comp] = g;
        }
        if !(flux.iter().all(|f| f.is_finite()) && energy.is_finite()) {
            return Err(Error::numerical("non-finite flux"));
        }
        Ok(CorrectorSolution {
            flux,
            energy,
            gradient,
            diagnostics: LoadDiagnostics { iterations, residual_history: history },
        })
    }
}

/// Validates `|xi| = 1` and solves one corrector problem.
pub fn solve_corrector(field: &PhaseField, xi: [f64; 3], cfg: &SolverConfig) -> Result<CorrectorSolution> {
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!("load vector must have unit norm (got {norm})")));
    }
    CellSolver::new(field, cfg)?.solve(xi)
}

/// Apparent conductivity from the three unit loads, symmetrized.
pub fn apparent_conductivity(field: &PhaseField, cfg: &SolverConfig) -> Result<ApparentResult> {
    let start = Instant::now();
    let mut solver = CellSolver::new(field, cfg)?;
    let mut raw = [[0.0; 3]; 3];
    let mut energies = [0.0; 3];
    let mut loads: Vec<LoadDiagnostics> = Vec::with_capacity(3);
    for j in 0..3 {
        let mut xi = [0.0; 3];
        xi[j] = 1.0;
        let sol = solver.solve(xi)?;
        for i in 0..3 {
            raw[i][j] = sol.flux[i];
        }
        energies[j] = sol.energy;
        loads.push(sol.diagnostics);
    }
    let mut asym = 0.0;
    let mut norm = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            asym += (raw[i][j] - raw[j][i]).powi(2);
            norm += raw[i][j].powi(2);
        }
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| raw[i][j]);
    let loads: [LoadDiagnostics; 3] = loads.try_into().expect("three loads");
    Ok(ApparentResult {
        tensor: SymTensor2::from_matrix_symmetrized(&m),
        raw,
        asymmetry: (asym / norm).sqrt(),
        energies,
        loads,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
