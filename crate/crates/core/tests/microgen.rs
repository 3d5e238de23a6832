use homsym::microgen::*;
use homsym::tensor::SymTensor2;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `E[p_i²] = ∫₀^∞ σ_i/(1+2tσ_i) Π_j (1+2tσ_j)^(-1/2) dt`, trapezoid in `x = ln t`.
fn acg_moment_oracle(s: [f64; 3]) -> [f64; 3] {
    let mut m = [0.0; 3];
    let dx = 0.005;
    let mut x: f64 = -50.0;
    while x <= 50.0 {
        let t = x.exp();
        let common: f64 = s.iter().map(|sj| (1.0 + 2.0 * t * sj).powf(-0.5)).product();
        for i in 0..3 {
            m[i] += dx * t * s[i] / (1.0 + 2.0 * t * s[i]) * common;
        }
        x += dx;
    }
    m
}

fn iso() -> SymTensor2 {
    SymTensor2::identity() * (1.0 / 3.0)
}

#[test]
fn moment_quadrature_matches_integral_oracle() {
    for s in [[1.0, 1.0, 1.0], [0.2, 0.3, 0.5], [0.05, 0.05, 0.9], [0.01, 0.2, 0.79]] {
        let q = acg_moments_diag(s);
        let o = acg_moment_oracle(s);
        for k in 0..3 {
            assert!((q[k] - o[k]).abs() < 1e-6, "{s:?}: {q:?} vs {o:?}");
        }
    }
}

#[test]
fn calibration_hits_target() {
    for target in [
        SymTensor2::diag(0.1, 0.1, 0.8),
        SymTensor2::diag(0.5, 0.3, 0.2),
        SymTensor2::new(0.4, 0.35, 0.25, 0.05, -0.02, 0.1),
    ] {
        let sigma = calibrate_acg(&target).unwrap();
        let (vals, vecs) = sigma.eigen();
        let o = acg_moment_oracle(vals);
        let m = vecs * nalgebra::Matrix3::from_diagonal(&Vector3::from(o)) * vecs.transpose();
        let m = SymTensor2::from_matrix_symmetrized(&m);
        assert!(m.max_abs_diff(&target) < 1e-4, "{m:?} vs {target:?}");
    }
}

#[test]
fn ti_target_gives_prolate_sigma() {
    let s = calibrate_acg(&SymTensor2::diag(0.1, 0.1, 0.8)).unwrap();
    assert!(s.0[3].abs() < 1e-14 && s.0[4].abs() < 1e-14 && s.0[5].abs() < 1e-14);
    assert!((s.0[0] - s.0[1]).abs() < 1e-12);
    assert!(s.0[2] > s.0[0]);
}

#[test]
fn sampled_second_moment_matches_target() {
    let target = SymTensor2::diag(0.1, 0.1, 0.8);
    let sampler = AcgSampler::new(&calibrate_acg(&target).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let mut m = SymTensor2::ZERO;
    let mut mean = Vector3::zeros();
    for _ in 0..n {
        let p = sampler.sample(&mut rng);
        m += SymTensor2::outer(&p);
        mean += p;
    }
    let m = m * (1.0 / n as f64);
    assert!(m.max_abs_diff(&target) < 1e-3, "{m:?}");
    mean /= n as f64;
    assert!(mean.abs().max() < 0.01);
}

#[test]
fn identity_sigma_samples_uniformly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut m = SymTensor2::ZERO;
    let mut mean = Vector3::zeros();
    let n = 100_000;
    for _ in 0..n {
        let p = sample_direction(&SymTensor2::identity(), &mut rng).unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-12);
        m += SymTensor2::outer(&p);
        mean += p;
    }
    let m = m * (1.0 / n as f64);
    assert!(m.max_abs_diff(&iso()) < 0.01);
    assert!((mean / n as f64).abs().max() < 0.01);
}

#[test]
fn near_degenerate_sigma_concentrates_on_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sigma = SymTensor2::diag(1e-8, 1e-8, 1.0);
    for _ in 0..1000 {
        let p = sample_direction(&sigma, &mut rng).unwrap();
        assert!(p[2].abs() > 0.999);
    }
}

#[test]
fn reference_spec_fiber_count() {
    let spec = FiberSpec::reference(iso());
    assert!((fiber_volume(spec.length, spec.radius()) - 8377.580409572781).abs() < 1e-9);
    assert_eq!(fiber_count(&spec, 128.0), 25);
}

fn brute_force_min_surface_distance(set: &FiberSet) -> f64 {
    // dense sampling of both axes over all 27 images, independent of the segment solver
    let pts = |f: &Fiber| -> Vec<Vector3<f64>> {
        (0..=400)
            .map(|k| f.center_vec() + f.direction_vec() * (f.half_length * (2.0 * k as f64 / 400.0 - 1.0)))
            .collect()
    };
    let l = set.cell;
    let mut best = f64::INFINITY;
    for (i, a) in set.fibers.iter().enumerate() {
        let pa = pts(a);
        for (j, b) in set.fibers.iter().enumerate().skip(i) {
            let pb = pts(b);
            for sx in -1..=1 {
                for sy in -1..=1 {
                    for sz in -1..=1 {
                        if i == j && (sx, sy, sz) == (0, 0, 0) {
                            continue;
                        }
                        let s = Vector3::new(sx as f64, sy as f64, sz as f64) * l;
                        for p in &pa {
                            for q in pb.iter().step_by(4) {
                                best = best.min((q + s - p).norm() - a.radius - b.radius);
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn generated_set_respects_separation_and_volume_fraction() {
    let spec = FiberSpec::reference(iso());
    let set = generate(&spec, 128.0, 42).unwrap();
    assert_eq!(set.fibers.len(), 25);
    assert!((set.volume_fraction() - 0.1).abs() < 0.005);
    assert!(set.min_surface_distance() >= spec.min_separation);
    // coarse sampling overestimates the distance slightly, never underestimates it by more than the step
    assert!(brute_force_min_surface_distance(&set) >= spec.min_separation - 1e-9);
    for f in &set.fibers {
        assert!((f.direction_vec().norm() - 1.0).abs() < 1e-12);
        assert!(f.center.iter().all(|&c| (0.0..128.0).contains(&c)));
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = FiberSpec::reference(SymTensor2::diag(0.1, 0.1, 0.8));
    let a = generate(&spec, 128.0, 42).unwrap();
    let b = generate(&spec, 128.0, 42).unwrap();
    assert_eq!(a, b);
    let c = generate(&spec, 128.0, 43).unwrap();
    assert_ne!(a, c);
    let fa = voxelize(&a, 64, [0.2, 1.2]).unwrap();
    let fb = voxelize(&b, 64, [0.2, 1.2]).unwrap();
    assert_eq!(fa.phases, fb.phases);
}

#[test]
fn pooled_orientation_matches_target() {
    let target = SymTensor2::diag(0.1, 0.1, 0.8);
    let spec = FiberSpec::reference(target);
    let mut all = FiberSet::empty(128.0);
    let mut seed = 0;
    while all.fibers.len() < 500 {
        all.fibers.extend(generate(&spec, 128.0, seed).unwrap().fibers);
        seed += 1;
    }
    let a = empirical_orientation(&all).unwrap();
    assert!((a.trace() - 1.0).abs() < 1e-12);
    assert!(a.max_abs_diff(&target) < 0.02, "{a:?}");
}

#[test]
fn voxel_fraction_tracks_analytic_fraction() {
    let spec = FiberSpec::reference(iso());
    let set = generate(&spec, 128.0, 5).unwrap();
    // h = 1 μm ≤ r/2
    let f = voxelize(&set, 128, [0.2, 1.2]).unwrap();
    assert!((f.phase_fraction(1) - set.volume_fraction()).abs() < 0.01);
}

#[test]
fn too_small_cell_is_rejected() {
    let spec = FiberSpec::reference(iso());
    assert!(matches!(generate(&spec, 100.0, 1), Err(homsym::Error::Validation(_))));
}

#[test]
fn infeasible_packing_reports_generation_error() {
    // inflated by the separation, these fibers would fill about 91 % of the cell
    let spec = FiberSpec {
        length: 20.0,
        diameter: 10.0,
        min_separation: 2.0,
        volume_fraction: 0.6,
        orientation: SymTensor2::diag(0.3, 0.3, 0.4),
        match_orientation: false,
    };
    match generate(&spec, 40.0, 1) {
        Err(homsym::Error::Generation { achieved_vf, .. }) => assert!(achieved_vf < 0.6),
        other => panic!("expected generation error, got {other:?}"),
    }
}
