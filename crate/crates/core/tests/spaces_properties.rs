use hyperstab_core::envelope::{certificate_value, check_p_triangle, envelope_norm, theta};
use hyperstab_core::spaces::{check_axioms, eval_norm, estimate_kappa, power_space};
use hyperstab_core::{Space64, Vector64};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vector64> {
    prop::collection::vec(-10.0..10.0f64, 3).prop_map(|c| Vector64::new(c).unwrap())
}

fn spaces() -> Vec<Space64> {
    let cross = Space64::cross_2norm(3).unwrap();
    vec![
        cross.clone(),
        Space64::lp_cross(3, 0.5).unwrap(),
        power_space(&cross, 0.25).unwrap(),
        power_space(&cross, 0.5).unwrap(),
        Space64::scaled(&cross, 3.0).unwrap(),
    ]
}

proptest! {
    #[test]
    fn symmetric_and_homogeneous(x in vec3(), y in vec3(), lam in -5.0..5.0f64, which in 0usize..5) {
        let s = &spaces()[which];
        let xy = eval_norm(s, &x, &y).unwrap();
        let yx = eval_norm(s, &y, &x).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-12 * xy.max(1.0));
        let scaled = eval_norm(s, &x.scale(lam), &y).unwrap();
        let want = lam.abs().powf(s.beta) * xy;
        prop_assert!((scaled - want).abs() <= 1e-9 * want.max(1e-300) + 1e-12);
    }

    #[test]
    fn relaxed_triangle(x in vec3(), y in vec3(), z in vec3(), which in 0usize..5) {
        let s = &spaces()[which];
        let lhs = eval_norm(s, &(&x + &y), &z).unwrap();
        let rhs = s.kappa * (eval_norm(s, &x, &z).unwrap() + eval_norm(s, &y, &z).unwrap());
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn cross_norm_is_area(x in vec3(), y in vec3()) {
        let s = Space64::cross_2norm(3).unwrap();
        // Lagrange identity: |x × y|² = |x|²|y|² − (x·y)²
        let gram = x.dot(&x) * y.dot(&y) - x.dot(&y).powi(2);
        let n = eval_norm(&s, &x, &y).unwrap();
        prop_assert!((n * n - gram.max(0.0)).abs() <= 1e-9 * (x.dot(&x) * y.dot(&y)).max(1.0));
    }

    #[test]
    fn envelope_is_certified_and_dominated(x in vec3(), z in vec3(), seed in 0u64..1000) {
        let s = Space64::lp_cross(3, 0.5).unwrap().with_kappa(1.0).unwrap();
        let r = envelope_norm(&s, &x, &z, 32, seed).unwrap();
        let total = r.certificate.iter().fold(Vector64::zeros(3), |a, p| &a + p);
        prop_assert!((&total - &x).norm_inf() <= 1e-9 * x.norm_inf().max(1.0));
        let cert = certificate_value(&s, &r.certificate, &z).unwrap();
        prop_assert!((cert - r.value).abs() <= 1e-12 * r.value.max(1.0));
        prop_assert!(r.value <= eval_norm(&s, &x, &z).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn declared_spaces_have_no_axiom_violations() {
    for s in spaces() {
        let rep = check_axioms(&s, 2000, 11).unwrap();
        assert_eq!(rep.total_violations(), 0, "{:?} {:#?}", s.family, rep);
    }
}

#[test]
fn underdeclared_kappa_is_caught() {
    let s = Space64::lp_cross(3, 0.5).unwrap().with_kappa(1.0).unwrap();
    let rep = check_axioms(&s, 5000, 3).unwrap();
    assert!(rep.b4.violations > 0);
    assert!(rep.kappa_observed > 1.4);
}

#[test]
fn kappa_estimates_bracket_declared() {
    let k = estimate_kappa(&Space64::cross_2norm(3).unwrap(), 5000, 1).unwrap();
    assert!(k <= 1.0 + 1e-9);
    let k = estimate_kappa(&Space64::lp_cross(3, 0.5).unwrap(), 20_000, 1).unwrap();
    assert!((1.5..=2.0 + 1e-9).contains(&k));
}

#[test]
fn theta_and_p_triangle() {
    assert_eq!(theta(1.0f64, 1.0).unwrap(), 1.0);
    assert!((theta(1.0f64, 2.0).unwrap() - 0.5).abs() < 1e-15);
    let rep = check_p_triangle(&Space64::cross_2norm(3).unwrap(), 500, 5).unwrap();
    assert_eq!(rep.violations, 0);
}
