use std::fs;

use homsym::analysis::*;
use homsym::microgen::FiberSpec;
use homsym::study::*;
use homsym::tensor::{build_basis4, SymTensor2, SymmetryClass};
use homsym::Error;

#[test]
fn rate_fit_recovers_power_laws() {
    let sizes = [64.0, 128.0, 256.0, 512.0];
    for (c, p) in [(0.3, -1.5), (2.0, -3.0), (0.01, -0.7)] {
        let errs: Vec<f64> = sizes.iter().map(|l: &f64| c * l.powf(p)).collect();
        let f = fit_rate("a11", &sizes, &errs).unwrap();
        assert!((f.slope - p).abs() < 1e-12, "{}", f.slope);
        assert!((f.intercept - c.ln()).abs() < 1e-10);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-10));
    }
    assert!(matches!(fit_rate("a11", &sizes, &[1.0, 0.0, 1.0, 1.0]), Err(Error::Validation(_))));
    assert!(fit_rate("a11", &[64.0], &[1.0]).is_err());
    assert!(fit_rate("a11", &[128.0, 64.0], &[1.0, 2.0]).is_err());
}

#[test]
fn voigt_reuss_examples() {
    let (lo, hi) = voigt_reuss_bounds([0.2, 1.2], 0.1).unwrap();
    assert!((lo - 0.218_181_818_181_818_2).abs() < 1e-12);
    assert!((hi - 0.3).abs() < 1e-12);
    assert_eq!(voigt_reuss_bounds([0.2, 1.2], 0.0).unwrap(), (0.2, 0.2));
    let (lo, hi) = voigt_reuss_bounds([0.7, 0.7], 0.4).unwrap();
    assert!((lo - hi).abs() < 1e-15);
    assert!(voigt_reuss_bounds([0.2, 1.2], 1.5).is_err());
}

#[test]
fn histogram_binning() {
    let h = histogram(&[0.5; 7]).unwrap();
    assert_eq!(h.counts, vec![7]);
    let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let h = histogram(&v).unwrap();
    assert!(h.counts.len() >= MIN_BINS);
    assert_eq!(h.counts.iter().sum::<usize>(), 1000);
    assert_eq!(h.edges.len(), h.counts.len() + 1);
    assert!(h.edges.windows(2).all(|w| w[1] > w[0]));
    let area: f64 = h.density().iter().zip(h.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
    assert!((area - 1.0).abs() < 1e-12);
    // uniform data: width 2·IQR/n^{1/3} = 0.1 gives the floor of 20 bins
    assert_eq!(h.counts.len(), 20);
    assert!(histogram(&[]).is_err());
}

fn small_study(dir: &std::path::Path) -> StudyResult {
    let cfg = StudyConfig {
        fiber: FiberSpec::reference(SymTensor2::identity() * (1.0 / 3.0)),
        sizes_um: vec![128.0, 160.0],
        voxel_um: 8.0,
        n_realizations: 6,
        n_per_size: None,
        master_seed: 3,
        symmetry: SymmetryClass::Isotropic,
        solver: Default::default(),
        reference: ReferenceSpec::SelfLargest { factor: 1 },
        conductivities: DEFAULT_CONDUCTIVITIES,
        alpha: DEFAULT_ALPHA,
    };
    run_study(&cfg, Some(dir)).unwrap()
}

#[test]
fn analyze_writes_all_outputs() {
    let results = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let study = small_study(results.path());
    let report = analyze(results.path(), out.path()).unwrap();

    for f in ["rates.csv", "residuals.csv", "bounds.json"] {
        assert!(out.path().join(f).is_file(), "{f}");
    }
    let rates = fs::read_to_string(out.path().join("rates.csv")).unwrap();
    assert_eq!(rates.lines().next().unwrap(), "kind,component,slope,intercept,points,sizes");
    assert_eq!(report.rates.iter().filter(|(k, _)| k == "ran").count(), 3);
    assert!(report.rates.iter().all(|(_, f)| ["a11", "a22", "a33"].contains(&f.component.as_str())));

    assert_eq!(report.bounds.len(), 2);
    assert!(report.bounds.iter().all(|b| b.within));

    let hist_dir = out.path().join("histograms");
    assert!(hist_dir.join("L128_a11.csv").is_file());
    assert!(hist_dir.join("L160_symmetry_ratio.csv").is_file());
    for (name, h) in &report.histograms {
        if name.ends_with("ratio") {
            assert!(h.edges[0] >= 0.0 && *h.edges.last().unwrap() <= 1.0 + 1e-12, "{name}");
        }
    }

    let s = &study.summary;
    let reference = s.reference.tensor.unwrap();
    for (k, recs) in study.records.iter().enumerate() {
        for r in sample_ratios(recs, &s.config.symmetry, Some(&reference)).unwrap() {
            assert!((0.0..=1.0 + 1e-12).contains(&r.dispersion));
            let (t, q) = (r.projected_total.unwrap(), r.symmetry.unwrap());
            assert!((0.0..=1.0 + 1e-12).contains(&t) && (0.0..=1.0 + 1e-12).contains(&q));
            // the two ratios are the legs of a right triangle with unit hypotenuse
            assert!((t * t + q * q - 1.0).abs() < 1e-10, "size {k}");
        }
    }
}

#[test]
fn mu_q_residual_curve_vanishes_for_symmetric_tensors() {
    let results = tempfile::tempdir().unwrap();
    let mut summary = small_study(results.path()).summary;
    let basis = build_basis4(&SymmetryClass::Isotropic).unwrap();
    for (k, s) in summary.sizes.iter_mut().enumerate() {
        s.mu_q = basis[0] * (1.0 + k as f64) + basis[1] * 0.3;
    }
    for (_, r) in mu_q_residual_curve(&summary, &SymmetryClass::Isotropic).unwrap() {
        assert!(r < 1e-14);
    }
    for s in summary.sizes.iter_mut() {
        s.mu_q = homsym::tensor::SymTensor4::ZERO;
    }
    assert!(matches!(
        mu_q_residual_curve(&summary, &SymmetryClass::Isotropic),
        Err(Error::Numerical(_))
    ));
}
