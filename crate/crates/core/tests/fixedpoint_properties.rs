use hyperstab_core::fixedpoint::{
    apply_t, apply_to_function, direct_apply, epsilon_star, geometric_bound, iterate, lambda_numeric, lambda_power,
    orbit_apply, t_power, IterationSpec, ScalarErrorFn,
};
use hyperstab_core::{AbsMode, Function64, Space64, Vector64};
use proptest::prelude::*;

fn cross() -> Space64 {
    Space64::cross_2norm(3).unwrap()
}

fn term() -> impl Strategy<Value = Function64> {
    (-2.0..2.0f64, -3.0..6.0f64, any::<bool>(), 0usize..3).prop_map(|(c, e, signed, axis)| {
        let mode = if signed { AbsMode::Signed } else { AbsMode::Abs };
        Function64::power(c, e, mode, Vector64::basis(3, axis))
    })
}

fn function() -> impl Strategy<Value = Function64> {
    prop::collection::vec(term(), 1..4).prop_map(|ts| ts.iter().skip(1).fold(ts[0].clone(), |f, t| f.plus(t).unwrap()))
}

fn spec() -> impl Strategy<Value = IterationSpec<f64>> {
    prop::collection::vec((0.3..3.0f64, -1.5..1.5f64, 1u8..=2), 1..4)
        .prop_map(|parts| IterationSpec::from_parts(cross(), &parts).unwrap())
}

proptest! {
    #[test]
    fn closed_form_matches_pointwise(s in spec(), f in function(), x in 0.2..4.0f64, neg in any::<bool>()) {
        let x = if neg { -x } else { x };
        let closed = apply_to_function(&s, &f).eval(x).unwrap();
        let direct = apply_t(&s, &f, x).unwrap();
        prop_assert!((&closed - &direct).norm_inf() <= 1e-10 * direct.norm_inf().max(1.0));
    }

    #[test]
    fn orbit_and_direct_recursion_agree(s in spec(), f in function(), x in 0.2..3.0f64, n in 0usize..4) {
        let a = orbit_apply(&s, &f, x, n).unwrap();
        let b = direct_apply(&s, &f, x, n).unwrap();
        let c = t_power(&s, &f, n).eval(x).unwrap();
        let scale = b.norm_inf().max(1.0);
        prop_assert!((&a - &b).norm_inf() <= 1e-9 * scale);
        prop_assert!((&c - &b).norm_inf() <= 1e-9 * scale);
    }

    #[test]
    fn lambda_closed_form(s in spec(), c in 0.0..3.0f64, e in -3.0..3.0f64, x in 0.2..3.0f64, n in 0usize..4) {
        let d = ScalarErrorFn::power(c, e);
        let closed = lambda_power(&s, &d, n).eval(x).unwrap();
        let direct = lambda_numeric(&s, &d, x, n).unwrap();
        prop_assert!((closed - direct).abs() <= 1e-10 * direct.max(1e-300));
    }
}

/// One branch `(Tξ)(x) = 0.5 ξ(x)` on constants: Λε = 0.5 ε.
fn halving() -> IterationSpec<f64> {
    IterationSpec::from_parts(cross(), &[(1.0, 0.5, 1)]).unwrap()
}

#[test]
fn geometric_series_oracle() {
    let eps = ScalarErrorFn::constant(0.3);
    let star = epsilon_star(&halving(), &eps, 1.7, 1.0, 1e-16, 10_000).unwrap();
    assert!(star.converged);
    assert!((star.value - 0.6).abs() < 1e-14);
    let g = geometric_bound(0.3f64, 0.5, 1.0).unwrap();
    assert!((g.bound - 0.6).abs() < 1e-15);
}

#[test]
fn geometric_case_converges_from_two_starts() {
    let s = halving();
    let xs: Vec<f64> = (1..=100).map(|i| 0.05 * i as f64).collect();
    let ws = [Vector64::basis(3, 0), Vector64::basis(3, 1)];
    let starts = [
        Function64::constant(Vector64::from_f64(&[0.0, 0.0, 1.0]).unwrap()),
        Function64::constant(Vector64::from_f64(&[0.0, 0.0, -2.0]).unwrap()),
    ];
    let mut psis = Vec::new();
    for phi in &starts {
        // ‖Tφ − φ, y‖ = 0.5 ‖φ, y‖
        let eps = ScalarErrorFn::constant(0.5 * phi.constant_part().norm2());
        let rep = iterate(&s, phi, &eps, &xs, &ws, 1e-12, 500).unwrap();
        assert!(rep.converged);
        assert!(rep.k_observed <= 1.0 + 1e-6);
        psis.push(rep.psi);
    }
    for &x in &xs {
        let d = &psis[0].eval(x).unwrap() - &psis[1].eval(x).unwrap();
        assert!(d.norm2() <= 2e-12);
    }
}
