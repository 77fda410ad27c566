use std::f64::consts::{FRAC_PI_2, PI};

use cusp_eta::sturm_liouville::{build_measure, MeasureGrid, Potential};
use cusp_eta::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn cylinder_kernel_from_measure_matches_closed_form() {
    let shape = CuspShape::zero(1.0).unwrap();
    for lam in [0.5, 1.0, 5.5] {
        let q = Potential::from_shape(&shape, lam, Sign::Plus).unwrap();
        let grid = MeasureGrid { panel: FRAC_PI_2, ..MeasureGrid::default() };
        let m = build_measure(&q, lam * lam + 37.0 / 0.01, &grid).unwrap();
        for s in [0.01, 0.1, 1.0] {
            let v = boundary_kernel_term(&shape, -lam, 2.0, s, &m).unwrap();
            let e = cylinder_kernel(lam, 1.0, s);
            assert!((v - e).abs() < 1e-7 * e.abs().max(1e-6), "lambda {lam} s {s}: {v} vs {e}");
        }
    }
}

#[test]
fn kernel_rejects_short_measures_and_vanishes_on_empty_ones() {
    let shape = CuspShape::zero(1.0).unwrap();
    let q = Potential::from_shape(&shape, 1.0, Sign::Plus).unwrap();
    let m = build_measure(&q, 10.0, &MeasureGrid::default()).unwrap();
    assert!(boundary_kernel_term(&shape, 1.0, 2.0, 0.1, &m).is_err());
    let empty = build_measure(&q, 0.5, &MeasureGrid::default()).unwrap();
    assert_eq!(boundary_kernel_term(&shape, 1.0, 2.0, 0.1, &empty).unwrap(), 0.0);
}

#[test]
fn hyperbolic_kernel_is_stable_under_measure_refinement() {
    let shape = CuspShape::mulog(1.0, 1.0).unwrap();
    let q = Potential::from_shape(&shape, 1.0, Sign::Plus).unwrap();
    let coarse = build_measure(&q, 60.0, &MeasureGrid::default()).unwrap();
    let fine = build_measure(&q, 120.0, &MeasureGrid::default()).unwrap();
    let a = boundary_kernel_term(&shape, 1.0, 2.0, 1.0, &coarse).unwrap();
    let b = boundary_kernel_term(&shape, 1.0, 2.0, 1.0, &fine).unwrap();
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn cylinder_contribution_is_the_eta_invariant() {
    let spec = circle_dirac(0.5, FRAC_PI_2, 60);
    let ctx = CuspContext::new(CuspShape::zero(1.0).unwrap()).resolving_up_to(3.0).unwrap();
    let heat = delocalised_eta(&spec, EtaMethod::Heat(HeatParams::default())).unwrap();
    for a_prime in [3.0, 1.5] {
        let r = ctx.contribution(&spec, a_prime, 2, &EtaNumerics::default()).unwrap();
        assert!((r.value - c(1.0, 1.0)).norm() < 1e-6, "{}", r.value);
        assert!((r.value - heat.value).norm() < r.error_estimate + heat.error);
        let sum: f64 = r.per_lambda.iter().map(|p| p.value.norm()).sum();
        assert!(r.value.norm() <= sum + r.error_estimate);
        assert!(!r.symmetric);
    }
}

#[test]
fn symmetric_spectra_give_zero() {
    let spec = circle_dirac(0.5, 0.0, 20);
    for shape in [CuspShape::zero(1.0).unwrap(), CuspShape::mulog(1.0, 1.0).unwrap()] {
        let mut req = EtaRequest { shape, spectrum: spec.clone(), a_prime: 2.0, p: 2, numerics: EtaNumerics::default() };
        let r = cusp_contribution(&req).unwrap();
        assert!(r.symmetric);
        assert_eq!(r.value, c(0.0, 0.0));
        req.numerics.short_circuit = false;
        let r = cusp_contribution(&req).unwrap();
        assert!(!r.symmetric && !r.per_lambda.is_empty());
        assert!(r.value.norm() < 1e-6);
    }
}

#[test]
fn requests_are_validated() {
    let spec = circle_dirac(0.5, 1.0, 5);
    let base = EtaRequest {
        shape: CuspShape::zero(1.0).unwrap(),
        spectrum: spec,
        a_prime: 1.0,
        p: 2,
        numerics: EtaNumerics::default(),
    };
    assert_eq!(cusp_contribution(&base).unwrap_err().kind(), ErrorKind::InvalidInput);
    let odd = EtaRequest { a_prime: 2.0, p: 3, ..base.clone() };
    assert!(cusp_contribution(&odd).is_err());
    let kernel = EtaRequest { a_prime: 2.0, spectrum: circle_dirac(0.0, 1.0, 5), ..base };
    assert!(matches!(cusp_contribution(&kernel), Err(Error::Precondition(_))));
}

#[test]
fn vanishing_integral() {
    assert_eq!(vanish_check(&[1.0, -1.0], &[c(0.3, 0.2), c(0.3, 0.2)], 1.0).unwrap(), 0.0);
    let spec = circle_dirac(0.5, PI / 3.0, 200);
    let (l, t): (Vec<f64>, Vec<Complex64>) = spec.entries().iter().map(|e| (e.lambda, e.trace)).unzip();
    for a in [0.5, 1.0, 2.0] {
        assert!(vanish_check(&l, &t, a).unwrap() < 1e-6);
    }
    // each term vanishes on its own
    assert!(vanish_check(&[1.0], &[c(1.0, 0.0)], 1.0).unwrap() < 1e-12);
}

#[test]
fn cylinder_split() {
    let r = cylinder_closed_form(&circle_dirac(0.5, PI, 400), 1.0).unwrap();
    assert!((r.eta.value - c(1.0, 0.0)).norm() < 1e-8);
    assert!(r.remainder.norm() < 1e-6);
    let r = cylinder_closed_form(&circle_dirac(0.5, FRAC_PI_2, 400), 0.5).unwrap();
    assert!((r.eta.value - c(1.0, 1.0)).norm() < 1e-8);
    assert!(r.remainder.norm() < 1e-6);
    let r = cylinder_closed_form(&circle_dirac(0.5, 0.0, 50), 1.0).unwrap();
    assert_eq!((r.eta.value, r.remainder), (c(0.0, 0.0), c(0.0, 0.0)));
}

#[test]
fn cutoff_profile() {
    let psi = CutoffProfile::smoothstep(2.0);
    assert_eq!((psi.psi(2.0), psi.psi(3.0)), (1.0, 0.0));
    assert_eq!((psi.dpsi(2.0), psi.dpsi(3.0)), (0.0, 0.0));
    let mut prev = 1.0;
    for k in 1..=100 {
        let v = psi.psi(2.0 + k as f64 / 100.0);
        assert!(v <= prev);
        prev = v;
    }
}

#[test]
fn regularised_kernel_only() {
    let ctx = CuspContext::new(CuspShape::zero(1.0).unwrap());
    let spec = EquivariantSpectrum::new(vec![SpectrumEntry { lambda: 0.0, mult: 1, trace: c(1.0, 0.0) }]).unwrap();
    let opts = RegularisedOptions {
        t_range: Some((1e-4, 1e-2)),
        numerics: EtaNumerics { truncated: false, ..EtaNumerics::default() },
        ..RegularisedOptions::default()
    };
    let r = regularised_eta(&ctx, &spec, &CutoffProfile::smoothstep(1.0), &[0.2, 0.1, 0.05], 2, &opts).unwrap();
    assert!((r.value - c(1.0, 0.0)).norm() < 1e-5, "{r:?}");
    assert!((r.value - c(1.0, 0.0)).norm() < 2.0 * r.error_estimate);
    assert!(regularised_eta(&ctx, &spec, &CutoffProfile::smoothstep(1.0), &[0.1, 0.2], 2, &opts).is_err());
}

#[test]
fn regularised_circle_with_kernel() {
    // punctured spectrum is symmetric, so only the kernel survives
    let ctx = CuspContext::new(CuspShape::zero(1.0).unwrap());
    let spec = circle_dirac(0.0, PI, 120);
    let punctured = delocalised_eta(&spec.without_kernel(), EtaMethod::Abel(AbelParams::default())).unwrap();
    let r = regularised_eta(&ctx, &spec, &CutoffProfile::smoothstep(1.0), &[0.1], 2, &RegularisedOptions::default())
        .unwrap();
    let expect = c(1.0, 0.0) + punctured.value;
    assert!((r.value - expect).norm() < 1e-3, "{r:?}");
    assert!((r.value - expect).norm() < r.error_estimate);
}

fn context() -> &'static CuspContext {
    static CTX: std::sync::OnceLock<CuspContext> = std::sync::OnceLock::new();
    CTX.get_or_init(|| CuspContext::new(CuspShape::mulog(1.0, 1.0).unwrap()))
}

fn random_spectrum() -> impl Strategy<Value = EquivariantSpectrum> {
    prop::collection::btree_map(-6i32..=6, (0.0f64..1.0, -PI..PI), 1..6).prop_filter_map("needs a gap", |m| {
        let entries: Vec<SpectrumEntry> = m
            .into_iter()
            .filter(|(k, _)| *k != 0)
            .map(|(k, (r, t))| SpectrumEntry { lambda: 0.5 * k as f64, mult: 1, trace: Complex64::from_polar(r, t) })
            .collect();
        EquivariantSpectrum::new(entries).ok().filter(|s| !s.is_empty())
    })
}

fn numerics() -> EtaNumerics {
    EtaNumerics { s_min: Some(0.05), truncated: false, short_circuit: false, ..EtaNumerics::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn negating_the_spectrum_negates_the_contribution(spec in random_spectrum()) {
        let a = context().contribution(&spec, 2.0, 2, &numerics()).unwrap();
        let b = context().contribution(&spec.negated(), 2.0, 2, &numerics()).unwrap();
        prop_assert_eq!(a.value, -b.value);
    }

    #[test]
    fn contribution_is_linear_in_the_traces(spec in random_spectrum(), r in 0.0f64..1.0, t in -PI..PI) {
        let z = Complex64::from_polar(r, t);
        let a = context().contribution(&spec, 2.0, 2, &numerics()).unwrap();
        let b = context().contribution(&spec.scale_traces(z).unwrap(), 2.0, 2, &numerics()).unwrap();
        prop_assert!((b.value - z * a.value).norm() <= 1e-12 * (z.norm() * a.value.norm()).max(1e-300) + 1e-300);
    }
}
