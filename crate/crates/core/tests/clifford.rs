use cusp_eta::*;
use proptest::prelude::*;

fn unit(p: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; p];
    v[i] = 1.0;
    v
}

#[test]
fn representations_satisfy_the_relations() {
    for p in [2, 4, 6, 8] {
        let rep = build_rep(p).unwrap();
        assert_eq!(rep.dim(), 1 << (p / 2));
        let r = rep.residuals();
        assert!(r.max() < 1e-12, "p = {p}: {r:?}");
    }
    assert!(build_rep(4).unwrap().residuals().anticommutator < 1e-14);
}

#[test]
fn commutator_identity_special_cases() {
    let rep = build_rep(4).unwrap();
    let u = [0.3, -1.2, 0.5, 2.0];
    assert_eq!(check_commutator_identity(&rep, &u, &u, &[1.0, 0.0, -1.0, 0.5]).unwrap(), 0.0);
    let r = check_commutator_identity(&rep, &unit(4, 0), &unit(4, 1), &unit(4, 2)).unwrap();
    assert!(r < 1e-14);
    assert!(check_commutator_identity(&rep, &u, &u, &[1.0]).is_err());
}

#[test]
fn connection_defect_examples() {
    let rep = build_rep(4).unwrap();
    let half = check_connection_condition(&rep, &[0.4, -0.3, 1.1, 0.2], 0.5, &[1.0, 2.0, 0.0, -1.0], &[0.0, 1.0, 1.0, 0.5]).unwrap();
    assert!(half.clifford_residual < 1e-12 && half.hermiticity_defect < 1e-12);
    let one = check_connection_condition(&rep, &unit(4, 0), 1.0, &unit(4, 0), &unit(4, 1)).unwrap();
    assert!((one.hermiticity_defect - 1.0).abs() < 1e-12);
    for f in [-1.0, 0.0, 0.3, 2.0] {
        let perp = check_connection_condition(&rep, &unit(4, 0), f, &unit(4, 2), &unit(4, 3)).unwrap();
        assert!(perp.hermiticity_defect < 1e-15);
    }
}

#[test]
fn conformal_dirac_converges_at_second_order() {
    let rep = build_rep(2).unwrap();
    let levels = [8, 16, 32, 64];
    let lin = check_conformal_dirac(&rep, |x| x, |_| 1.0, &levels).unwrap();
    assert!((lin.order - 2.0).abs() < 0.2, "{lin:?}");
    let log = check_conformal_dirac(&rep, |x| -(x + 1.0).ln(), |x| -1.0 / (x + 1.0), &levels).unwrap();
    assert!((log.order - 2.0).abs() < 0.2, "{log:?}");
    assert!(log.residuals.windows(2).all(|w| w[1] < w[0]));
    assert!(log.product_residuals.iter().all(|&r| r < 1e-10));
    let flat = check_conformal_dirac(&rep, |_| 0.7, |_| 0.0, &levels).unwrap();
    assert!(flat.residuals.iter().all(|&r| r < 1e-10), "{flat:?}");
    assert!(check_conformal_dirac(&build_rep(4).unwrap(), |x| x, |_| 1.0, &levels).is_err());
}

fn vec_of(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, p)
}

fn triple() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    prop::sample::select(vec![2usize, 4, 6]).prop_flat_map(|p| (Just(p), vec_of(p), vec_of(p), vec_of(p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn commutator_identity_holds((p, u, v, w) in triple()) {
        let rep = build_rep(p).unwrap();
        prop_assert!(check_commutator_identity(&rep, &u, &v, &w).unwrap() < 1e-12);
    }

    #[test]
    fn defect_is_linear_in_f((p, g, v, w) in triple(), f in -3.0f64..3.0) {
        let rep = build_rep(p).unwrap();
        let r = check_connection_condition(&rep, &g, f, &v, &w).unwrap();
        prop_assert!(r.clifford_residual < 1e-12);
        let b: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        prop_assert!((r.hermiticity_defect - (2.0 * f - 1.0).abs() * b.abs()).abs() < 1e-12 * (1.0 + b.abs()));
    }
}
