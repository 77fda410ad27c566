use cusp_eta::sturm_liouville::{
    build_measure, discrete_eigs, eigenfunction_at, integrate_theta, parseval_check, spectral_density, weyl_m,
    DensityOptions, EigenOptions, InitialData, MeasureGrid, Potential, StepOptions, WeylOptions,
};
use cusp_eta::{CuspShape, Sign};
use num_complex::Complex64;
use proptest::prelude::*;

/// Ai by its Maclaurin series; accurate to ~1e-12 on [-6, 1].
fn airy_ai(x: f64) -> f64 {
    const C1: f64 = 0.355_028_053_887_817_2;
    const C2: f64 = 0.258_819_403_792_806_8;
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 1..200 {
        let k = k as f64;
        tf *= x3 / ((3.0 * k - 1.0) * (3.0 * k));
        tg *= x3 / ((3.0 * k) * (3.0 * k + 1.0));
        f += tf;
        g += tg;
        if tf.abs() + tg.abs() < 1e-18 {
            break;
        }
    }
    C1 * f - C2 * g
}

fn airy_zeros(n: usize) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut x = 0.0;
    let h = 1e-3;
    while zeros.len() < n {
        let (a, b) = (x - h, x);
        if airy_ai(a).signum() != airy_ai(b).signum() {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if airy_ai(mid).signum() == airy_ai(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        x -= h;
    }
    zeros
}

/// Composite Simpson on [a, b] with n (even) intervals.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn airy_eigenvalues_match_series_zeros() {
    let zeros = airy_zeros(2);
    assert!((zeros[0] + 2.33811).abs() < 1e-5);
    let atoms = discrete_eigs(&Potential::linear(), 5.0, &EigenOptions::default()).unwrap();
    assert_eq!(atoms.len(), 2);
    for (a, z) in atoms.iter().zip(&zeros) {
        assert!((a.nu + z).abs() < 1e-6, "{} vs {}", a.nu, -z);
    }
}

#[test]
fn harmonic_eigenvalues_are_odd_oscillator_levels() {
    // odd states of the full-line oscillator: nu = 2n + 1 with n odd
    let atoms = discrete_eigs(&Potential::harmonic(), 40.0, &EigenOptions::default()).unwrap();
    let expect: Vec<f64> = (0..10).map(|k| 4.0 * k as f64 + 3.0).collect();
    assert_eq!(atoms.len(), expect.len());
    for (a, e) in atoms.iter().zip(&expect) {
        assert!((a.nu - e).abs() < 1e-6, "{} vs {e}", a.nu);
    }
}

#[test]
fn harmonic_weights_match_quadrature_norms() {
    let atoms = discrete_eigs(&Potential::harmonic(), 12.0, &EigenOptions::default()).unwrap();
    // Dirichlet-normalised odd Hermite functions
    let thetas: [fn(f64) -> f64; 3] = [
        |y| y * (-y * y / 2.0).exp(),
        |y| (y - 2.0 * y.powi(3) / 3.0) * (-y * y / 2.0).exp(),
        |y| (y - 4.0 * y.powi(3) / 3.0 + 4.0 * y.powi(5) / 15.0) * (-y * y / 2.0).exp(),
    ];
    for (a, th) in atoms.iter().zip(thetas) {
        let norm = simpson(|y| th(y).powi(2), 0.0, 14.0, 20000);
        assert!((a.weight - 1.0 / norm).abs() < 1e-6 / norm, "{} vs {}", a.weight, 1.0 / norm);
        let (t, _) = eigenfunction_at(&Potential::harmonic(), a.nu, 1.3, &EigenOptions::default()).unwrap();
        assert!((t - th(1.3)).abs() < 1e-6);
    }
}

#[test]
fn constant_potential_has_no_atoms_below_the_edge() {
    for nu_max in [0.0, 0.5, 0.98] {
        assert!(discrete_eigs(&Potential::constant(1.0), nu_max, &EigenOptions::default()).unwrap().is_empty());
    }
}

#[test]
fn hyperbolic_density_vanishes_between_atoms() {
    let shape = CuspShape::mulog(1.0, 1.0).unwrap();
    let q = Potential::from_shape(&shape, 1.0, Sign::Plus).unwrap();
    let m = build_measure(&q, 50.0, &MeasureGrid::default()).unwrap();
    assert!(m.continuum.is_empty() && m.atoms.len() >= 2);
    for w in m.atoms.windows(2) {
        let nu = 0.5 * (w[0].nu + w[1].nu);
        assert!(spectral_density(&q, nu, &DensityOptions::default()).unwrap() < 1e-4);
    }
}

fn kaiser_bump(y: f64) -> f64 {
    let u = (y - 1.5) / 0.5;
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let x = 5.0 * (1.0 - u * u).sqrt();
    let (mut t, mut i0) = (1.0, 1.0);
    for k in 1..60 {
        t *= x * x / (k * k) as f64;
        i0 += t;
    }
    i0 * (-1.0 / (1.0 - u * u)).exp()
}

#[test]
fn parseval_on_harmonic_potential() {
    let q = Potential::harmonic();
    // local frequency on (1, 2) must reach ~25 for the window's tail to drop below 1e-3
    let m = build_measure(&q, 701.0, &MeasureGrid::default()).unwrap();
    assert_eq!(m.atoms.len(), 175);
    let r = parseval_check(&q, kaiser_bump, (1.0, 2.0), &m).unwrap();
    assert!(r.norm_residual < 1e-3 && r.inversion_residual < 1e-3, "{r:?}");
}

#[test]
fn oscillation_count_is_monotone_in_nu() {
    let q = Potential::harmonic();
    let zeros = |nu: f64| {
        let sol = integrate_theta(&q, Complex64::new(nu, 0.0), InitialData::Theta1, 6.0, &[], &StepOptions {
            h_max: 0.05,
            ..StepOptions::default()
        })
        .unwrap();
        sol.samples.windows(2).filter(|w| w[0].theta_hat.re * w[1].theta_hat.re < 0.0).count()
    };
    let mut prev = 0;
    for k in 0..60 {
        let c = zeros(-2.0 + 0.5 * k as f64);
        assert!(c >= prev, "count dropped at nu = {}", -2.0 + 0.5 * k as f64);
        prev = c;
    }
    assert!(prev >= 4);
}

fn potentials() -> Vec<Potential> {
    let shape = CuspShape::mulog(1.0, 1.0).unwrap();
    vec![
        Potential::harmonic(),
        Potential::linear(),
        Potential::constant(1.0),
        Potential::from_shape(&shape, 1.0, Sign::Plus).unwrap(),
        Potential::from_shape(&shape, 2.0, Sign::Minus).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn wronskian_is_conserved(which in 0usize..5, re in -5.0f64..30.0, im in -3.0f64..3.0, y_max in 0.5f64..3.0) {
        let q = &potentials()[which];
        let nu = Complex64::new(re, im);
        let grid: Vec<f64> = (1..20).map(|k| y_max * k as f64 / 20.0).collect();
        let o = StepOptions::default();
        let s1 = integrate_theta(q, nu, InitialData::Theta1, y_max, &grid, &o).unwrap();
        let s2 = integrate_theta(q, nu, InitialData::Theta2, y_max, &grid, &o).unwrap();
        for y in grid.iter().chain([y_max].iter()) {
            let a = s1.samples.iter().find(|s| s.y == *y).unwrap();
            let b = s2.samples.iter().find(|s| s.y == *y).unwrap();
            let scale = (a.log_scale + b.log_scale).exp();
            let (p1, p2) = (a.theta_hat * b.dtheta_hat * scale, a.dtheta_hat * b.theta_hat * scale);
            let w = p1 - p2;
            // relative to the size of the products, which grow in forbidden regions
            prop_assert!((w - 1.0).norm() < 1e-8 * (p1.norm() + p2.norm()).max(1.0), "W = {} at y = {}", w, y);
        }
    }

    #[test]
    fn m_function_is_herglotz(which in 0usize..5, re in -5.0f64..60.0, im in 1e-3f64..5.0) {
        let q = &potentials()[which];
        let f = weyl_m(q, Complex64::new(re, im), &WeylOptions::default()).unwrap().f;
        prop_assert!(f.im < 0.0, "f = {}", f);
    }

    #[test]
    fn measure_is_monotone(nu_max in 2.0f64..40.0) {
        let m = build_measure(&Potential::constant(1.0), nu_max, &MeasureGrid::default()).unwrap();
        let mut prev = 0.0;
        for k in 0..=50 {
            let r = m.cumulative(nu_max * k as f64 / 50.0);
            prop_assert!(r >= prev);
            prev = r;
        }
    }
}
