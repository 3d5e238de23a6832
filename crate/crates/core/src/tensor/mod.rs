//! Symmetric second- and fourth-order tensors, orthogonal actions on them,
//! point groups and symmetry-class projectors.
//!
//! Voigt ordering throughout is `(11, 22, 33, 23, 13, 12)`. A fourth-order
//! tensor with minor and major symmetries is stored as the plain 6×6 matrix
//! `T_IJ = T_ijkl` (no Mandel √2 factors); the inner product then carries the
//! weight `S = diag(1, 1, 1, 2, 2, 2)` on both sides.

mod group;
mod json;
mod projection;

pub use group::{PointGroup, WeightedElement};
pub use json::TensorJson;
pub use projection::{
    build_basis4, closed_form_proj2, complement2, group_average_proj2, group_average_proj4,
    proj4, symmetry_residual2, symmetry_residual4, SymmetryClass,
};

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voigt index → (i, j) index pair.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Inner-product weights of the Voigt components.
pub const VOIGT_WEIGHTS: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];

/// Component labels in Voigt order.
pub const VOIGT_LABELS: [&str; 6] = ["a11", "a22", "a33", "a23", "a13", "a12"];

/// (i, j) → Voigt index.
pub const fn voigt_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) | (2, 1) => 3,
        (0, 2) | (2, 0) => 4,
        _ => 5,
    }
}

/// Symmetric 3×3 tensor stored as its six independent components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymTensor2(pub [f64; 6]);

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2([0.0; 6]);

    pub fn new(a11: f64, a22: f64, a33: f64, a23: f64, a13: f64, a12: f64) -> Self {
        SymTensor2([a11, a22, a33, a23, a13, a12])
    }

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a11: f64, a22: f64, a33: f64) -> Self {
        SymTensor2([a11, a22, a33, 0.0, 0.0, 0.0])
    }

    pub fn voigt(&self) -> [f64; 6] {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[voigt_index(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// Builds from a full matrix, averaging the off-diagonal pairs.
    pub fn from_matrix_symmetrized(m: &Matrix3<f64>) -> Self {
        let mut v = [0.0; 6];
        for (k, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            v[k] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
        SymTensor2(v)
    }

    /// Builds from a full matrix that must already be symmetric.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let scale = m.abs().max().max(1e-300);
        let asym = (m - m.transpose()).abs().max();
        if asym > 1e-12 * scale {
            return Err(Error::validation(format!(
                "matrix is not symmetric (max |A - A^T| = {asym:.3e})"
            )));
        }
        Ok(Self::from_matrix_symmetrized(m))
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let v = &self.0;
        Matrix3::new(v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2])
    }

    /// Rank-one tensor `p ⊗ p`.
    pub fn outer(p: &Vector3<f64>) -> Self {
        SymTensor2([
            p[0] * p[0],
            p[1] * p[1],
            p[2] * p[2],
            p[1] * p[2],
            p[0] * p[2],
            p[0] * p[1],
        ])
    }

    /// Frobenius inner product `tr(AB)`.
    pub fn dot(&self, other: &Self) -> f64 {
        (0..6).map(|k| VOIGT_WEIGHTS[k] * self.0[k] * other.0[k]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = SymmetricEigen::new(self.to_matrix()).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// Eigen-decomposition; eigenvalues ascending, eigenvectors as matching columns.
    pub fn eigen(&self) -> ([f64; 3], Matrix3<f64>) {
        let e = SymmetricEigen::new(self.to_matrix());
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
        let vals = [e.eigenvalues[idx[0]], e.eigenvalues[idx[1]], e.eigenvalues[idx[2]]];
        let mut vecs = Matrix3::zeros();
        for (c, &k) in idx.iter().enumerate() {
            vecs.set_column(c, &e.eigenvectors.column(k));
        }
        (vals, vecs)
    }

    pub fn mul_vec(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.to_matrix() * x
    }

    /// `A ⊗ A` as a fourth-order tensor.
    pub fn self_outer(&self) -> SymTensor4 {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.0[i] * self.0[j];
            }
        }
        SymTensor4(m)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..6).map(|k| (self.0[k] - other.0[k]).abs()).fold(0.0, f64::max)
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: Self) -> Self {
        let mut v = self.0;
        for (a, b) in v.iter_mut().zip(rhs.0) {
            *a += b;
        }
        SymTensor2(v)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> Self {
        SymTensor2(self.0.map(|x| x * s))
    }
}

/// Fourth-order tensor with minor and major symmetries, as a 6×6 Voigt matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymTensor4(pub [[f64; 6]; 6]);

impl SymTensor4 {
    pub const ZERO: SymTensor4 = SymTensor4([[0.0; 6]; 6]);

    /// Validates that the matrix is symmetric to 1e-12 relative.
    pub fn from_voigt(m: [[f64; 6]; 6]) -> Result<Self> {
        let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..6 {
            for j in 0..i {
                if (m[i][j] - m[j][i]).abs() > 1e-12 * scale.max(1e-300) {
                    return Err(Error::validation(format!(
                        "6x6 Voigt matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SymTensor4(m))
    }

    pub fn voigt(&self) -> [[f64; 6]; 6] {
        self.0
    }

    /// Full index access `T_ijkl`.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[voigt_index(i, j)][voigt_index(k, l)]
    }

    /// `⟨Q, R⟩ = tr(S Q S R)`.
    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                s += VOIGT_WEIGHTS[i] * VOIGT_WEIGHTS[j] * self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Bilinear form `B : T : C`.
    pub fn contract(&self, b: &SymTensor2, c: &SymTensor2) -> f64 {
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                s += VOIGT_WEIGHTS[i] * VOIGT_WEIGHTS[j] * b.0[i] * self.0[i][j] * c.0[j];
            }
        }
        s
    }

    /// Largest deviation from major symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut a = 0.0f64;
        for i in 0..6 {
            for j in 0..i {
                a = a.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        a
    }

    /// Eigenvalues of the quadratic form `B : T : B` with respect to the
    /// Frobenius norm on `B`, ascending.
    pub fn form_eigenvalues(&self) -> [f64; 6] {
        // B:T:B = b^T (S T S) b with |B|^2 = b^T S b; substitute c = S^{1/2} b.
        let mut m = nalgebra::Matrix6::<f64>::zeros();
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = VOIGT_WEIGHTS[i].sqrt() * self.0[i][j] * VOIGT_WEIGHTS[j].sqrt();
            }
        }
        let m = 0.5 * (m + m.transpose());
        let e = SymmetricEigen::new(m).eigenvalues;
        let mut v = [0.0; 6];
        v.copy_from_slice(e.as_slice());
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |a, x| a.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// Symmetric rank-one sum `(A ⊗ B + B ⊗ A) / 2`.
    pub fn sym_outer(a: &SymTensor2, b: &SymTensor2) -> Self {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = 0.5 * (a.0[i] * b.0[j] + b.0[i] * a.0[j]);
            }
        }
        SymTensor4(m)
    }
}

impl Add for SymTensor4 {
    type Output = SymTensor4;
    fn add(self, rhs: Self) -> Self {
        let mut m = self.0;
        for i in 0..6 {
            for j in 0..6 {
                m[i][j] += rhs.0[i][j];
            }
        }
        SymTensor4(m)
    }
}

impl AddAssign for SymTensor4 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for SymTensor4 {
    type Output = SymTensor4;
    fn sub(self, rhs: Self) -> Self {
        self + rhs * -1.0
    }
}

impl Mul<f64> for SymTensor4 {
    type Output = SymTensor4;
    fn mul(self, s: f64) -> Self {
        SymTensor4(self.0.map(|row| row.map(|x| x * s)))
    }
}

/// A 3×3 orthogonal matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthogonalMatrix(Matrix3<f64>);

impl OrthogonalMatrix {
    /// Tolerance on `|QᵀQ − I|` entries accepted by [`OrthogonalMatrix::new`].
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let dev = (m.transpose() * m - Matrix3::identity()).abs().max();
        if !(dev <= Self::TOLERANCE) {
            return Err(Error::validation(format!(
                "matrix is not orthogonal (max |QᵀQ - I| = {dev:.3e})"
            )));
        }
        Ok(OrthogonalMatrix(m))
    }

    pub fn identity() -> Self {
        OrthogonalMatrix(Matrix3::identity())
    }

    pub fn diag(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vector3::new(s1, s2, s3)))
    }

    /// Right-handed rotation by `angle` about the unit `axis` (Rodrigues).
    pub fn rotation(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) {
            return Err(Error::validation("rotation axis must be non-zero"));
        }
        let k = axis / n;
        let kx = Matrix3::new(0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0);
        let m = Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos());
        Self::new(m)
    }

    /// Matrix whose rows are the given orthonormal frame vectors; maps global
    /// coordinates into frame coordinates.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(&[
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        ]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        OrthogonalMatrix(self.0.transpose())
    }

    pub fn compose(&self, other: &Self) -> Self {
        OrthogonalMatrix(self.0 * other.0)
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// 6×6 matrix `K` with `voigt(Q A Qᵀ) = K · voigt(A)`.
    pub fn voigt_rotation(&self) -> [[f64; 6]; 6] {
        let q = &self.0;
        let mut k = [[0.0; 6]; 6];
        for (row, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            for (col, &(a, b)) in VOIGT_PAIRS.iter().enumerate() {
                k[row][col] = if a == b {
                    q[(i, a)] * q[(j, b)]
                } else {
                    q[(i, a)] * q[(j, b)] + q[(i, b)] * q[(j, a)]
                };
            }
        }
        k
    }
}

/// `Q A Qᵀ`.
pub fn act2(q: &OrthogonalMatrix, a: &SymTensor2) -> SymTensor2 {
    let m = q.0 * a.to_matrix() * q.0.transpose();
    SymTensor2::from_matrix_symmetrized(&m)
}

/// Orthogonal action on fourth-order tensors: `T'_ijkl = Q_ia Q_jb Q_kc Q_ld T_abcd`,
/// computed as `K T Kᵀ` with `K` from [`OrthogonalMatrix::voigt_rotation`].
pub fn act4(q: &OrthogonalMatrix, t: &SymTensor4) -> SymTensor4 {
    let k = q.voigt_rotation();
    let mut kt = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            kt[i][j] = (0..6).map(|l| k[i][l] * t.0[l][j]).sum();
        }
    }
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..=i {
            let v: f64 = (0..6).map(|l| kt[i][l] * k[j][l]).sum();
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    SymTensor4(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_action_is_trivial() {
        let a = SymTensor2::new(1.0, 2.0, 3.0, 0.1, -0.2, 0.3);
        assert_eq!(act2(&OrthogonalMatrix::identity(), &a), a);
        let t = a.self_outer();
        assert!(act4(&OrthogonalMatrix::identity(), &t).max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn reflection_flips_shear_sign() {
        let a = SymTensor2::new(1.0, 2.0, 3.0, 0.0, 0.0, 0.5);
        let q = OrthogonalMatrix::diag(1.0, -1.0, 1.0).unwrap();
        let b = act2(&q, &a);
        assert_eq!(b, SymTensor2::new(1.0, 2.0, 3.0, 0.0, 0.0, -0.5));
    }

    #[test]
    fn quarter_turn_about_e3_swaps_axes() {
        let q = OrthogonalMatrix::rotation(&Vector3::z(), FRAC_PI_2).unwrap();
        // direct product oracle
        let m = q.matrix() * Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)) * q.matrix().transpose();
        let b = act2(&q, &SymTensor2::diag(1.0, 2.0, 3.0));
        assert!((m[(0, 0)] - 2.0).abs() < 1e-15 && (m[(1, 1)] - 1.0).abs() < 1e-15);
        assert!(b.max_abs_diff(&SymTensor2::diag(2.0, 1.0, 3.0)) < 1e-15);
    }

    #[test]
    fn permutation_moves_q1111() {
        // x→y, y→z, z→x: Q e1 = e2, Q e2 = e3, Q e3 = e1
        let q = OrthogonalMatrix::new(Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0)).unwrap();
        let mut m = [[0.0; 6]; 6];
        m[0][0] = 1.0;
        let t = act4(&q, &SymTensor4(m));
        // index-permutation oracle: T'_ijkl = T_{σ(i)σ(j)σ(k)σ(l)} with σ = Qᵀ
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let expect = if (i, j, k, l) == (1, 1, 1, 1) { 1.0 } else { 0.0 };
                        assert!((t.get(i, j, k, l) - expect).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_orthogonal() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(OrthogonalMatrix::new(m), Err(Error::Validation(_))));
    }

    #[test]
    fn frobenius_norm_matches_matrix_norm() {
        let a = SymTensor2::new(1.0, -2.0, 0.5, 0.3, -0.7, 0.25);
        assert!((a.norm() - a.to_matrix().norm()).abs() < 1e-14);
    }

    #[test]
    fn fourth_order_norm_matches_full_index_sum() {
        let a = SymTensor2::new(1.0, -2.0, 0.5, 0.3, -0.7, 0.25);
        let b = SymTensor2::new(0.2, 0.1, -0.4, 1.3, 0.6, -0.5);
        let t = SymTensor4::sym_outer(&a, &b);
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += t.get(i, j, k, l).powi(2);
                    }
                }
            }
        }
        assert!((t.norm() - s.sqrt()).abs() < 1e-14);
    }
}
