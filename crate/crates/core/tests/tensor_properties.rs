use homsym::tensor::*;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn sym2() -> impl Strategy<Value = SymTensor2> {
    prop::array::uniform6(-2.0f64..2.0).prop_map(SymTensor2)
}

fn sym4() -> impl Strategy<Value = SymTensor4> {
    prop::collection::vec(-1.0f64..1.0, 21).prop_map(|v| {
        let mut m = [[0.0; 6]; 6];
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                m[i][j] = v[k];
                m[j][i] = v[k];
                k += 1;
            }
        }
        SymTensor4(m)
    })
}

fn rotation() -> impl Strategy<Value = OrthogonalMatrix> {
    (prop::array::uniform3(-1.0f64..1.0), 0.0f64..std::f64::consts::TAU, any::<bool>()).prop_filter_map(
        "degenerate axis",
        |(a, angle, reflect)| {
            let axis = Vector3::from(a);
            if axis.norm() < 1e-3 {
                return None;
            }
            let r = OrthogonalMatrix::rotation(&axis, angle).ok()?;
            Some(if reflect { r.compose(&OrthogonalMatrix::diag(1.0, 1.0, -1.0).unwrap()) } else { r })
        },
    )
}

fn unit_axis() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0f64..1.0).prop_filter_map("degenerate axis", |a| {
        let v = Vector3::from(a);
        let n = v.norm();
        (n > 1e-2).then(|| [v[0] / n, v[1] / n, v[2] / n])
    })
}

fn class() -> impl Strategy<Value = SymmetryClass> {
    prop_oneof![
        Just(SymmetryClass::Isotropic),
        Just(SymmetryClass::Cubic),
        unit_axis().prop_map(|axis| SymmetryClass::TransverselyIsotropic { axis }),
        rotation().prop_map(|r| {
            let m = r.matrix();
            let row = |i: usize| [m[(i, 0)], m[(i, 1)], m[(i, 2)]];
            SymmetryClass::Orthotropic { axes: [row(0), row(1), row(2)] }
        }),
    ]
}

fn spd() -> impl Strategy<Value = SymTensor2> {
    (rotation(), prop::array::uniform3(0.1f64..3.0)).prop_map(|(r, l)| act2(&r, &SymTensor2::diag(l[0], l[1], l[2])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn act2_preserves_norm_and_spectrum(q in rotation(), a in sym2()) {
        let b = act2(&q, &a);
        prop_assert!((b.norm() - a.norm()).abs() < 1e-12);
        let (ea, eb) = (a.eigenvalues(), b.eigenvalues());
        for k in 0..3 {
            prop_assert!((ea[k] - eb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn act4_matches_act2_on_rank_one(q in rotation(), b in sym2()) {
        let lhs = act4(&q, &b.self_outer());
        let rhs = act2(&q, &b).self_outer();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn act4_preserves_inner_product(q in rotation(), s in sym4(), t in sym4()) {
        let lhs = act4(&q, &s).dot(&act4(&q, &t));
        prop_assert!((lhs - s.dot(&t)).abs() < 1e-12);
    }

    #[test]
    fn isotropic_tensors_are_fixed(q in rotation()) {
        for e in build_basis4(&SymmetryClass::Isotropic).unwrap() {
            prop_assert!(act4(&q, &e).max_abs_diff(&e) < 1e-12);
        }
    }

    #[test]
    fn proj2_algebra(c in class(), a in sym2(), b in sym2()) {
        let pa = closed_form_proj2(&c, &a).unwrap();
        let pb = closed_form_proj2(&c, &b).unwrap();
        prop_assert!(closed_form_proj2(&c, &pa).unwrap().max_abs_diff(&pa) < 1e-12);
        prop_assert!((pa.dot(&b) - a.dot(&pb)).abs() < 1e-12);
        let r = a - pa;
        prop_assert!((a.norm().powi(2) - pa.norm().powi(2) - r.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn proj4_algebra(c in class(), s in sym4(), t in sym4()) {
        let ps = proj4(&c, &s).unwrap();
        let pt = proj4(&c, &t).unwrap();
        prop_assert!(proj4(&c, &ps).unwrap().max_abs_diff(&ps) < 1e-12);
        prop_assert!((ps.dot(&t) - s.dot(&pt)).abs() < 1e-12);
        let r = s - ps;
        prop_assert!((s.norm().powi(2) - ps.norm().powi(2) - r.norm().powi(2)).abs() < 1e-12);
        prop_assert!(ps.norm() <= s.norm() + 1e-12);
    }

    #[test]
    fn closed_form_equals_group_average(c in class(), a in sym2()) {
        let g = c.group().unwrap();
        let avg = group_average_proj2(&g, &a).unwrap();
        let cf = closed_form_proj2(&c, &a).unwrap();
        prop_assert!(avg.max_abs_diff(&cf) < 1e-10, "{}: {:?} vs {:?}", c.name(), avg, cf);
    }

    #[test]
    fn basis_projection_equals_group_average(c in class(), t in sym4()) {
        let g = c.group().unwrap();
        let avg = group_average_proj4(&g, &t).unwrap();
        let p = proj4(&c, &t).unwrap();
        prop_assert!(avg.max_abs_diff(&p) < 1e-10, "{}", c.name());
    }

    #[test]
    fn projection_preserves_bounds(c in class(), a in spd()) {
        let [lo, _, hi] = a.eigenvalues();
        let p = closed_form_proj2(&c, &a).unwrap().eigenvalues();
        prop_assert!(p[0] >= lo - 1e-12 && p[2] <= hi + 1e-12);
    }

    #[test]
    fn projection4_preserves_form_bounds(c in class(), a in spd(), b in spd()) {
        // convex combination of PSD forms stays PSD after projection
        let t = a.self_outer() * 0.5 + b.self_outer() * 0.5;
        let lo = t.form_eigenvalues()[0];
        let p = proj4(&c, &t).unwrap().form_eigenvalues();
        prop_assert!(p[0] >= lo.min(0.0) - 1e-12);
        prop_assert!(p[5] <= t.form_eigenvalues()[5] + 1e-12);
    }

    #[test]
    fn cubic_residual_below_isotropic(t in sym4()) {
        let ri = (t - proj4(&SymmetryClass::Isotropic, &t).unwrap()).norm();
        let rc = (t - proj4(&SymmetryClass::Cubic, &t).unwrap()).norm();
        prop_assert!(rc <= ri + 1e-12);
    }

    #[test]
    fn residuals_vanish_on_projected_inputs(c in class(), a in sym2(), t in sym4()) {
        let pa = closed_form_proj2(&c, &a).unwrap();
        prop_assert!(symmetry_residual2(&c, &pa).unwrap() < 1e-12);
        let pt = proj4(&c, &t).unwrap();
        if pt.norm() > 1e-6 {
            prop_assert!(symmetry_residual4(&c, &pt).unwrap() < 1e-10);
        }
    }
}

#[test]
fn octahedral_average_of_diag() {
    let a = SymTensor2::diag(1.0, 2.0, 3.0);
    let p = group_average_proj2(&PointGroup::octahedral(), &a).unwrap();
    assert!(p.max_abs_diff(&SymTensor2::diag(2.0, 2.0, 2.0)) < 1e-12);
}

#[test]
fn orthotropic_group_average_is_diagonal_part() {
    let a = SymTensor2::new(1.0, 2.0, 3.0, 0.4, -0.5, 0.6);
    let p = group_average_proj2(&PointGroup::orthotropic(), &a).unwrap();
    assert!(p.max_abs_diff(&SymTensor2::diag(1.0, 2.0, 3.0)) < 1e-15);
}

#[test]
fn trivial_group_average_is_identity_map() {
    let a = SymTensor2::new(1.0, 2.0, 3.0, 0.4, -0.5, 0.6);
    let p = group_average_proj2(&PointGroup::trivial(), &a).unwrap();
    assert_eq!(p, a);
}

#[test]
fn empty_group_is_rejected() {
    let g = PointGroup::Finite(vec![]);
    assert!(matches!(
        group_average_proj2(&g, &SymTensor2::identity()),
        Err(homsym::Error::Validation(_))
    ));
}

#[test]
fn ortho_projection_keeps_voigt_pattern() {
    let mut m = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            m[i][j] = 1.0 + (i * 6 + j).min(j * 6 + i) as f64;
        }
    }
    let t = SymTensor4(m);
    let p = proj4(&SymmetryClass::orthotropic_aligned(), &t).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let keep = (i < 3 && j < 3) || i == j;
            let expect = if keep { m[i][j] } else { 0.0 };
            assert!((p.0[i][j] - expect).abs() < 1e-14, "({i},{j})");
        }
    }
    assert!(symmetry_residual4(&SymmetryClass::orthotropic_aligned(), &p).unwrap() < 1e-15);
}

#[test]
fn iso_basis_is_fixed_by_projection() {
    let b = build_basis4(&SymmetryClass::Isotropic).unwrap();
    for e in &b {
        assert!(proj4(&SymmetryClass::Isotropic, e).unwrap().max_abs_diff(e) < 1e-14);
    }
    let cubic = build_basis4(&SymmetryClass::Cubic).unwrap();
    assert!(cubic[0].max_abs_diff(&b[0]) < 1e-15 && cubic[1].max_abs_diff(&b[1]) < 1e-15);
}

#[test]
fn residual2_of_isotropic_is_zero() {
    let a = SymTensor2::identity() * 0.7;
    assert!(symmetry_residual2(&SymmetryClass::Isotropic, &a).unwrap() < 1e-15);
}

#[test]
fn tilted_ti_projection_matches_rotated_frame() {
    let r = OrthogonalMatrix::rotation(&Vector3::new(1.0, 1.0, 0.0), 0.7).unwrap();
    let axis = r.matrix().transpose() * Vector3::z();
    let c = SymmetryClass::TransverselyIsotropic { axis: [axis[0], axis[1], axis[2]] };
    let a = SymTensor2::from_matrix(&Matrix3::new(2.0, 0.1, 0.2, 0.1, 1.0, 0.3, 0.2, 0.3, 0.5)).unwrap();
    // project in a frame where the axis is e3
    let local = act2(&r, &a);
    let expect = act2(&r.transpose(), &closed_form_proj2(&SymmetryClass::ti_e3(), &local).unwrap());
    assert!(closed_form_proj2(&c, &a).unwrap().max_abs_diff(&expect) < 1e-12);
}
