use proptest::prelude::*;

use ricci_geom::atp::{classify, CausalClass};
use ricci_geom::chart::ScalarField;
use ricci_geom::conformal::{self, ConformalPair};
use ricci_geom::curvature::Curvature;
use ricci_geom::expr::Expr;
use ricci_geom::flows::{self, Forcing};
use ricci_geom::jets::Jet2;
use ricci_geom::metric::{self, builtin_metric};
use ricci_geom::ode::StepControl;

fn names() -> Vec<String> {
    ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
}

fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        (0.5f64..2.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + sin({b})))")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*sin({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.prop_map(|a| format!("log(2 + cos({a}))")),
        ]
    })
}

fn point3() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn jet_matches_finite_differences(src in smooth_expr(), x in point3()) {
        let e = Expr::parse(&src, &names()).unwrap();
        let j: Jet2 = e.eval(&x).unwrap();
        let f = |p: &[f64]| e.value(p).unwrap();
        prop_assert!((j.value() - f(&x)).abs() <= 1e-12 * (1.0 + j.value().abs()));
        let h = 1e-4;
        let shift = |p: &[f64], i: usize, d: f64| {
            let mut q = p.to_vec();
            q[i] += d;
            q
        };
        for i in 0..3 {
            let fd = (f(&shift(&x, i, h)) - f(&shift(&x, i, -h))) / (2.0 * h);
            prop_assert!((j.d(i) - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "d{i} of {src}: {} vs {fd}", j.d(i));
            for k in 0..3 {
                let gp = |p: &[f64]| (f(&shift(p, k, h)) - f(&shift(p, k, -h))) / (2.0 * h);
                let fd2 = (gp(&shift(&x, i, h)) - gp(&shift(&x, i, -h))) / (2.0 * h);
                prop_assert!((j.dd(i, k) - fd2).abs() <= 1e-4 * (1.0 + fd2.abs()), "dd{i}{k} of {src}: {} vs {fd2}", j.dd(i, k));
            }
        }
    }

    #[test]
    fn jet_hessian_is_symmetric(src in smooth_expr(), x in point3()) {
        let j: Jet2 = Expr::parse(&src, &names()).unwrap().eval(&x).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                prop_assert_eq!(j.dd(i, k).to_bits(), j.dd(k, i).to_bits());
            }
        }
    }

    #[test]
    fn jet_exact_on_quadratics(c in proptest::collection::vec(-2.0f64..2.0, 10), x in point3()) {
        let src = format!(
            "{} + {}*x + {}*y + {}*z + {}*x*x + {}*y*y + {}*z*z + {}*x*y + {}*x*z + {}*y*z",
            c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8], c[9]
        );
        let j: Jet2 = Expr::parse(&src, &names()).unwrap().eval(&x).unwrap();
        let hess = [[2.0 * c[4], c[7], c[8]], [c[7], 2.0 * c[5], c[9]], [c[8], c[9], 2.0 * c[6]]];
        let grad = [
            c[1] + hess[0][0] * x[0] + hess[0][1] * x[1] + hess[0][2] * x[2],
            c[2] + hess[1][0] * x[0] + hess[1][1] * x[1] + hess[1][2] * x[2],
            c[3] + hess[2][0] * x[0] + hess[2][1] * x[1] + hess[2][2] * x[2],
        ];
        for i in 0..3 {
            prop_assert!((j.d(i) - grad[i]).abs() < 1e-12);
            for k in 0..3 {
                prop_assert!((j.dd(i, k) - hess[i][k]).abs() < 1e-12);
            }
        }
    }
}

fn quadratic_sigma(names: &[String], c: &[f64]) -> String {
    let mut terms = vec![format!("{:.4}", c[0])];
    for (i, n) in names.iter().enumerate() {
        terms.push(format!("{:.4}*{n}", c[1 + i] * 0.3));
        terms.push(format!("{:.4}*{n}^2", c[5 + i] * 0.05));
    }
    terms.join(" + ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn main_identity_holds_for_quadratic_sigma(
        which in 0usize..5,
        c in proptest::collection::vec(-1.0f64..1.0, 9),
        seed in 0u64..1000,
    ) {
        let name = ["minkowski3", "minkowski4", "cone3", "sphere3", "schwarzschild"][which];
        let g = builtin_metric(name).unwrap();
        let sigma = quadratic_sigma(g.chart().coord_names(), &c);
        let pair = ConformalPair::from_sigma(&g, &ScalarField::parse(g.chart(), &sigma).unwrap()).unwrap();
        let x = g.chart().sample(1, seed).unwrap().remove(0);
        let r = conformal::verify_main_identity(&pair, &x).unwrap();
        prop_assert!(r.max() < 1e-6, "{name}, sigma = {sigma}: {:?}", r.values());
        let conn = conformal::conformal_connection_check(&pair, &x, 4, seed).unwrap();
        prop_assert!(conn < 1e-8);
    }

    #[test]
    fn riemann_symmetries(which in 0usize..4, seed in 0u64..1000) {
        let name = ["sphere3", "schwarzschild", "cone3", "euclidean_polar2"][which];
        let g = builtin_metric(name).unwrap();
        let x = g.chart().sample(1, seed).unwrap().remove(0);
        let cv = Curvature::at(&g, &x).unwrap();
        let scale = cv.riemann.max_abs().max(1.0);
        prop_assert!(cv.riemann.antisymmetry_residual() / scale < 1e-10);
        prop_assert!(cv.riemann.bianchi_residual() / scale < 1e-9);
        prop_assert!(cv.ricci.asymmetry() < 1e-10 * scale);
    }

    #[test]
    fn inversion_is_an_involution(seed in 0u64..1000) {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let iota = metric::inversion_map().unwrap();
        let twice = iota.then(&iota).unwrap();
        let x = g.chart().sample(1, seed).unwrap().remove(0);
        let direct = metric::pullback_metric(&twice, &g, &x).unwrap().comps;
        // functoriality: (i . i)^* g = i^*(i^* g) evaluated through the chain rule
        let (y, jac) = iota.apply(&x).unwrap();
        let inner = metric::pullback_metric(&iota, &g, &y).unwrap().comps;
        let chained = metric::pullback_tensor(&jac, &inner);
        let gx = g.matrix(&x).unwrap();
        prop_assert!((&direct - &chained).amax() < 1e-12 * gx.amax().max(1.0));
        prop_assert!((&direct - &gx).amax() < 1e-12 * gx.amax().max(1.0));
    }

    #[test]
    fn causal_class_is_scale_invariant(a in proptest::collection::vec(-2.0f64..2.0, 3), n in -4.0f64..4.0, s in 0.1f64..10.0) {
        let v = nalgebra::DVector::from_vec(a);
        let c = classify(&v, n, 1e-9);
        let scaled = classify(&(&v * s), n * s * s, 1e-9);
        if c != CausalClass::Zero && scaled != CausalClass::Zero {
            prop_assert_eq!(c, scaled);
        }
    }

    #[test]
    fn constant_forcing_riccati_matches_tangent(c in 0.1f64..3.0, y0 in 0.2f64..3.0) {
        // y = sqrt(2c) tan(sqrt(c/2) t + atan(y0/sqrt(2c)))
        let k = (2.0 * c).sqrt();
        let oracle = (std::f64::consts::FRAC_PI_2 - (y0 / k).atan()) / (c / 2.0).sqrt();
        let run = flows::riccati_blowup(&Forcing::parse(&format!("{c}")).unwrap(), y0, 2.0 / y0 + 1.0, &StepControl::default(), false).unwrap();
        let t = run.t_esc().unwrap();
        prop_assert!((t - oracle).abs() < 0.005, "c {c}, y0 {y0}: {t} vs {oracle}");
        prop_assert!(t < 2.0 / y0);
        prop_assert!(run.dominance_violation < 1e-8);
    }

    #[test]
    fn null_ode_blows_up_at_reciprocal(alpha in 0.2f64..5.0) {
        let run = flows::null_coefficient_ode(alpha, 1.0, 10.0, &StepControl::default()).unwrap();
        prop_assert!((run.run.t_esc().unwrap() - 1.0 / alpha).abs() < 0.005);
        prop_assert!(run.closed_form_error < 1e-6);
    }
}
