use std::sync::OnceLock;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{act2, act4, OrthogonalMatrix, PointGroup, SymTensor2, SymTensor4};
use crate::error::{Error, Result};

/// Material symmetry class with its frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SymmetryClass {
    Isotropic,
    /// Cubic symmetry with respect to the coordinate axes.
    Cubic,
    TransverselyIsotropic { axis: [f64; 3] },
    /// `axes` rows form an orthonormal triad.
    Orthotropic { axes: [[f64; 3]; 3] },
}

impl SymmetryClass {
    pub fn ti_e3() -> Self {
        SymmetryClass::TransverselyIsotropic { axis: [0.0, 0.0, 1.0] }
    }

    pub fn orthotropic_aligned() -> Self {
        SymmetryClass::Orthotropic {
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SymmetryClass::Isotropic => "isotropic",
            SymmetryClass::Cubic => "cubic",
            SymmetryClass::TransverselyIsotropic { .. } => "transversely_isotropic",
            SymmetryClass::Orthotropic { .. } => "orthotropic",
        }
    }

    /// Checks axis normalization and orthogonality to 1e-12.
    pub fn validate(&self) -> Result<()> {
        self.frame().map(|_| ())
    }

    /// Rotation mapping global coordinates into the class frame.
    pub fn frame(&self) -> Result<OrthogonalMatrix> {
        match self {
            SymmetryClass::Isotropic | SymmetryClass::Cubic => Ok(OrthogonalMatrix::identity()),
            SymmetryClass::TransverselyIsotropic { axis } => {
                let a = Vector3::from(*axis);
                if !((a.norm() - 1.0).abs() <= 1e-12) {
                    return Err(Error::validation(format!(
                        "transverse-isotropy axis must be a unit vector (norm {})",
                        a.norm()
                    )));
                }
                // seed with the coordinate axis least aligned with `a`
                let k = (0..3)
                    .min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
                    .unwrap_or(0);
                let mut seed = Vector3::zeros();
                seed[k] = 1.0;
                let e1 = (seed - a * a.dot(&seed)).normalize();
                let e2 = a.cross(&e1);
                OrthogonalMatrix::from_rows([
                    [e1[0], e1[1], e1[2]],
                    [e2[0], e2[1], e2[2]],
                    [a[0], a[1], a[2]],
                ])
            }
            SymmetryClass::Orthotropic { axes } => {
                for i in 0..3 {
                    for j in 0..3 {
                        let d: f64 = (0..3).map(|k| axes[i][k] * axes[j][k]).sum();
                        let expect = if i == j { 1.0 } else { 0.0 };
                        if !((d - expect).abs() <= 1e-12) {
                            return Err(Error::validation(
                                "orthotropy axes must form an orthonormal triad",
                            ));
                        }
                    }
                }
                OrthogonalMatrix::from_rows(*axes)
            }
        }
    }

    /// Haar-measured group whose invariants make up the class.
    pub fn group(&self) -> Result<PointGroup> {
        let r = self.frame()?;
        Ok(match self {
            SymmetryClass::Isotropic => PointGroup::SO3,
            SymmetryClass::Cubic => PointGroup::octahedral(),
            SymmetryClass::TransverselyIsotropic { axis } => PointGroup::so2(*axis)?,
            SymmetryClass::Orthotropic { .. } => PointGroup::orthotropic().conjugate(&r),
        })
    }

    /// Dimension of the invariant fourth-order subspace.
    pub fn basis4_dim(&self) -> usize {
        match self {
            SymmetryClass::Isotropic => 2,
            SymmetryClass::Cubic => 3,
            SymmetryClass::TransverselyIsotropic { .. } => 5,
            SymmetryClass::Orthotropic { .. } => 9,
        }
    }
}

/// Closed-form projection of a second-order tensor onto the class.
pub fn closed_form_proj2(class: &SymmetryClass, a: &SymTensor2) -> Result<SymTensor2> {
    let r = class.frame()?;
    let local = act2(&r, a);
    let v = local.0;
    let p = match class {
        SymmetryClass::Isotropic | SymmetryClass::Cubic => {
            let alpha = local.trace() / 3.0;
            SymTensor2::diag(alpha, alpha, alpha)
        }
        SymmetryClass::TransverselyIsotropic { .. } => {
            let perp = 0.5 * (v[0] + v[1]);
            SymTensor2::diag(perp, perp, v[2])
        }
        SymmetryClass::Orthotropic { .. } => SymTensor2::diag(v[0], v[1], v[2]),
    };
    Ok(act2(&r.transpose(), &p))
}

/// Haar average `∫ Q A Qᵀ dμ(Q)`.
pub fn group_average_proj2(g: &PointGroup, a: &SymTensor2) -> Result<SymTensor2> {
    let mut out = SymTensor2::ZERO;
    for e in g.quadrature()? {
        out += act2(&e.q, a) * e.weight;
    }
    Ok(out)
}

/// Haar average of the fourth-order action.
pub fn group_average_proj4(g: &PointGroup, t: &SymTensor4) -> Result<SymTensor4> {
    let mut out = SymTensor4::ZERO;
    for e in g.quadrature()? {
        out += act4(&e.q, t) * e.weight;
    }
    Ok(out)
}

/// `A − P:A`.
pub fn complement2(class: &SymmetryClass, a: &SymTensor2) -> Result<SymTensor2> {
    Ok(*a - closed_form_proj2(class, a)?)
}

fn voigt_block(normal: [[f64; 3]; 3], shear: [f64; 3], scale: f64) -> SymTensor4 {
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = scale * normal[i][j];
        }
        m[i + 3][i + 3] = scale * shear[i];
    }
    SymTensor4(m)
}

fn iso_basis() -> [SymTensor4; 2] {
    let e1 = voigt_block([[1.0; 3]; 3], [0.0; 3], 1.0 / 3.0);
    let e2 = voigt_block(
        [[4.0, -2.0, -2.0], [-2.0, 4.0, -2.0], [-2.0, -2.0, 4.0]],
        [3.0; 3],
        1.0 / (6.0 * 5f64.sqrt()),
    );
    [e1, e2]
}

fn cubic_extra() -> SymTensor4 {
    voigt_block(
        [[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]],
        [1.0; 3],
        1.0 / 30f64.sqrt(),
    )
}

fn ortho_local_basis() -> Vec<SymTensor4> {
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        let mut m = [[0.0; 6]; 6];
        m[i][i] = 1.0;
        out.push(SymTensor4(m));
    }
    for (i, j) in [(1, 2), (0, 2), (0, 1)] {
        let mut m = [[0.0; 6]; 6];
        m[i][j] = std::f64::consts::FRAC_1_SQRT_2;
        m[j][i] = std::f64::consts::FRAC_1_SQRT_2;
        out.push(SymTensor4(m));
    }
    for i in 3..6 {
        let mut m = [[0.0; 6]; 6];
        m[i][i] = 0.5;
        out.push(SymTensor4(m));
    }
    out
}

/// Gram-Schmidt over the SO(2)-averaged images of the canonical symmetric 6×6 basis.
fn ti_local_basis() -> &'static [SymTensor4] {
    static BASIS: OnceLock<Vec<SymTensor4>> = OnceLock::new();
    BASIS.get_or_init(|| {
        let g = PointGroup::SO2 { axis: [0.0, 0.0, 1.0] };
        let mut basis: Vec<SymTensor4> = Vec::new();
        for i in 0..6 {
            for j in i..6 {
                let mut m = [[0.0; 6]; 6];
                m[i][j] = 1.0;
                m[j][i] = 1.0;
                let mut v = group_average_proj4(&g, &SymTensor4(m)).expect("SO(2) quadrature");
                for _ in 0..2 {
                    for b in &basis {
                        v = v - *b * v.dot(b);
                    }
                }
                let n = v.norm();
                if n > 1e-8 {
                    basis.push(v * (1.0 / n));
                }
            }
        }
        assert_eq!(basis.len(), 5, "transverse-isotropy basis is rank deficient");
        basis
    })
}

/// Orthonormal basis of the class-invariant fourth-order subspace, in global coordinates.
pub fn build_basis4(class: &SymmetryClass) -> Result<Vec<SymTensor4>> {
    let r = class.frame()?;
    let rt = r.transpose();
    Ok(match class {
        SymmetryClass::Isotropic => iso_basis().to_vec(),
        SymmetryClass::Cubic => {
            let [e1, e2] = iso_basis();
            vec![e1, e2, cubic_extra()]
        }
        SymmetryClass::TransverselyIsotropic { .. } => {
            ti_local_basis().iter().map(|e| act4(&rt, e)).collect()
        }
        SymmetryClass::Orthotropic { .. } => {
            ortho_local_basis().iter().map(|e| act4(&rt, e)).collect()
        }
    })
}

/// `Σ ⟨T, E_i⟩ E_i` over the class basis.
pub fn proj4(class: &SymmetryClass, t: &SymTensor4) -> Result<SymTensor4> {
    let mut out = SymTensor4::ZERO;
    for e in build_basis4(class)? {
        out += e * t.dot(&e);
    }
    Ok(out)
}

/// `‖A − P:A‖`.
pub fn symmetry_residual2(class: &SymmetryClass, a: &SymTensor2) -> Result<f64> {
    Ok(complement2(class, a)?.norm())
}

/// `‖T − P::T‖ / ‖P::T‖`.
pub fn symmetry_residual4(class: &SymmetryClass, t: &SymTensor4) -> Result<f64> {
    let p = proj4(class, t)?;
    let denom = p.norm();
    if !(denom > 0.0) {
        return Err(Error::numerical(format!(
            "projected fourth-order tensor has zero norm for class {}",
            class.name()
        )));
    }
    Ok((*t - p).norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_projection_of_diag() {
        let a = SymTensor2::diag(1.0, 2.0, 3.0);
        let p = closed_form_proj2(&SymmetryClass::Isotropic, &a).unwrap();
        assert!(p.max_abs_diff(&SymTensor2::diag(2.0, 2.0, 2.0)) < 1e-15);
        let g = group_average_proj2(&PointGroup::octahedral(), &a).unwrap();
        assert!(g.max_abs_diff(&SymTensor2::diag(2.0, 2.0, 2.0)) < 1e-14);
    }

    #[test]
    fn ti_projection_of_diag() {
        let p = closed_form_proj2(&SymmetryClass::ti_e3(), &SymTensor2::diag(1.0, 3.0, 5.0)).unwrap();
        assert!(p.max_abs_diff(&SymTensor2::diag(2.0, 2.0, 5.0)) < 1e-15);
    }

    #[test]
    fn ortho_projection_of_sample_mean() {
        let a = SymTensor2::new(0.3032, 0.2809, 0.2668, 0.0003, -0.0002, 0.0);
        let p = closed_form_proj2(&SymmetryClass::orthotropic_aligned(), &a).unwrap();
        assert!(p.max_abs_diff(&SymTensor2::diag(0.3032, 0.2809, 0.2668)) < 1e-15);
    }

    #[test]
    fn ortho_residual_of_single_shear() {
        let a = SymTensor2::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.3);
        let r = symmetry_residual2(&SymmetryClass::orthotropic_aligned(), &a).unwrap();
        assert!((r - 0.3 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn basis_cardinalities_and_orthonormality() {
        let classes = [
            SymmetryClass::Isotropic,
            SymmetryClass::Cubic,
            SymmetryClass::ti_e3(),
            SymmetryClass::orthotropic_aligned(),
        ];
        for c in classes {
            let b = build_basis4(&c).unwrap();
            assert_eq!(b.len(), c.basis4_dim());
            for (i, x) in b.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((x.dot(y) - expect).abs() < 1e-12, "{} ({i},{j})", c.name());
                }
            }
        }
    }

    #[test]
    fn cubic_extra_is_orthogonal_to_iso() {
        let p = proj4(&SymmetryClass::Isotropic, &cubic_extra()).unwrap();
        assert!(p.max_abs() < 1e-15);
    }

    #[test]
    fn printed_ti_scalings_are_not_unit() {
        let e3 = voigt_block([[-2.0, -2.0, 1.0], [-2.0, -2.0, 1.0], [1.0, 1.0, 4.0]], [0.0; 3], 1.0 / 6.0);
        assert!((e3.norm() - 1.0).abs() < 1e-14);
        assert!(proj4(&SymmetryClass::ti_e3(), &e3).unwrap().max_abs_diff(&e3) < 1e-12);
        let e4 = voigt_block(
            [[-8.0, 4.0, 4.0], [4.0, -8.0, 4.0], [4.0, 4.0, -8.0]],
            [9.0, 9.0, -6.0],
            6.0 / 30f64.sqrt(),
        );
        let e5 = voigt_block(
            [[1.0, -5.0, 4.0], [-5.0, 1.0, 4.0], [4.0, 4.0, -8.0]],
            [0.0, 0.0, 3.0],
            6.0 / 6f64.sqrt(),
        );
        assert!((e4.norm() - 1.0).abs() > 0.1);
        assert!((e5.norm() - 1.0).abs() > 0.1);
    }

    #[test]
    fn zero_projection_is_guarded() {
        let t = cubic_extra();
        assert!(matches!(
            symmetry_residual4(&SymmetryClass::Isotropic, &t),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn rejects_non_unit_axis() {
        let c = SymmetryClass::TransverselyIsotropic { axis: [0.0, 0.0, 1.1] };
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }
}
