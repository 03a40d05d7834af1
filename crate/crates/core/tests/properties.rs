use std::sync::{Arc, OnceLock};

use mustructure::exprlang::{self, Var};
use mustructure::linalg;
use mustructure::relaxation::{self, MatrixField};
use mustructure::solver::{self, LinearSystem, Load, POINCARE_REL_TOL};
use mustructure::verify::{generalized_translate, TranslationSpec};
use mustructure::{Expr, FunctionSpace, MuFunction, Structure, StructureSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        Just("pi".to_string()),
        (-200i32..200).prop_map(|k| format!("{}", k as f64 / 100.0)),
    ]
}

/// Smooth expressions on [-1, 1]³ with moderate growth.
fn smooth_expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + cos({b})))")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*sin({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("ln(2 + sin({a}))")),
            inner.prop_map(|a| format!("({a})^3")),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derivative_matches_central_differences(text in smooth_expr(), p in point()) {
        let e = exprlang::parse(&text).unwrap();
        let step = 1e-5;
        for v in Var::ALL {
            let d = e.differentiate(v).eval_at(p).unwrap();
            let (mut lo, mut hi) = (p, p);
            lo[v.index()] -= step;
            hi[v.index()] += step;
            let fd = (e.eval_at(hi).unwrap() - e.eval_at(lo).unwrap()) / (2.0 * step);
            let scale = 1f64.max(d.abs()).max(e.eval_at(p).unwrap().abs());
            prop_assert!((d - fd).abs() <= 1e-5 * scale, "{text} d/d{} at {p:?}: {d} vs {fd}", v.name());
        }
    }

    #[test]
    fn print_parse_round_trip(text in smooth_expr(), p in point()) {
        let e = exprlang::parse(&text).unwrap();
        let printed = e.to_string();
        let again = exprlang::parse(&printed).unwrap();
        prop_assert_eq!(again.to_string(), printed);
        prop_assert_eq!(again.eval_at(p).unwrap().to_bits(), e.eval_at(p).unwrap().to_bits());
    }
}

fn crossed_plates() -> &'static Arc<FunctionSpace> {
    static SPACE: OnceLock<Arc<FunctionSpace>> = OnceLock::new();
    SPACE.get_or_init(|| FunctionSpace::new(Arc::new(Structure::build(&StructureSpec::crossed_plates(0.125)).unwrap())))
}

fn nodal(space: &Arc<FunctionSpace>, values: &[f64]) -> MuFunction {
    let n = space.n_dofs();
    MuFunction::from_values(space, (0..n).map(|i| values[i % values.len()]).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_is_linear(
        u in prop::collection::vec(-1.0..1.0f64, 97),
        v in prop::collection::vec(-1.0..1.0f64, 89),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        k in prop_oneof![Just(0usize), Just(1), Just(2)],
        h in 0.05..0.25f64,
    ) {
        let space = crossed_plates();
        let (u, v) = (nodal(space, &u), nodal(space, &v));
        let spec = TranslationSpec::along(k, h, 0.25);
        let tu = generalized_translate(&u, &spec).unwrap().function;
        let tv = generalized_translate(&v, &spec).unwrap().function;
        let tw = generalized_translate(&u.lin_comb(a, &v, b), &spec).unwrap().function;
        let expect = tu.lin_comb(a, &tv, b);
        for (x, y) in tw.values.iter().zip(&expect.values) {
            prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn translation_fixes_constants(c in -5.0..5.0f64, k in prop_oneof![Just(0usize), Just(1), Just(2)], h in -0.25..0.25f64) {
        let space = crossed_plates();
        let u = nodal(space, &[c]);
        let t = generalized_translate(&u, &TranslationSpec::along(k, h, 0.25)).unwrap();
        for x in &t.function.values {
            prop_assert!((x - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn relaxation_is_basis_independent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, frame) = relaxation::random_admissible(&mut rng);
        let e1 = relaxation::b_orthonormal_basis_randomized(&b, &frame, &mut rng).unwrap();
        let e2 = relaxation::b_orthonormal_basis_randomized(&b, &frame, &mut rng).unwrap();
        let m1 = relaxation::relax_with_basis(&b, &e1);
        let m2 = relaxation::relax_with_basis(&b, &e2);
        prop_assert!(linalg::max_abs_diff(&m1, &m2) <= 1e-10);
        prop_assert!(linalg::max_abs_diff(&m1, &linalg::transpose(&m1)) <= 1e-12);
        for e in &e1.vectors {
            prop_assert!(linalg::norm(linalg::mat_vec(&m1, *e)) <= 1e-9);
        }
    }
}

fn plate_system() -> &'static (LinearSystem, f64) {
    static SYS: OnceLock<(LinearSystem, f64)> = OnceLock::new();
    SYS.get_or_init(|| {
        let st = Arc::new(Structure::build(&StructureSpec::unit_plate(0.1)).unwrap());
        let space = FunctionSpace::new(st.clone());
        let relaxed = relaxation::relax(&MatrixField::identity(), &st).unwrap();
        let sys = solver::assemble(&space, &relaxed, &Load::uniform(Expr::num(0.0), 1), None).unwrap();
        let c = solver::poincare_constant(&sys, 0, 3).unwrap().constant;
        (sys, c)
    })
}

fn quadratic(m: &solver::Csr, w: &[f64]) -> f64 {
    m.matvec(w).iter().zip(w).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn sampled_poincare_inequality(values in prop::collection::vec(-1.0..1.0f64, 121), smooth in any::<bool>(), seed in any::<u64>()) {
        let (sys, c) = plate_system();
        let mut w = if smooth {
            let f = exprlang::random_smooth(&mut ChaCha8Rng::seed_from_u64(seed));
            MuFunction::interpolate(&sys.space, &f).unwrap().values
        } else {
            values
        };
        sys.project_primal(&mut w);
        let mass = quadratic(&sys.m, &w);
        let energy = quadratic(&sys.a, &w);
        prop_assert!(mass <= c * energy * (1.0 + POINCARE_REL_TOL), "{mass} > {c} * {energy}");
    }
}
