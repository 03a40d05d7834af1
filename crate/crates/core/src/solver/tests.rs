use std::sync::Arc;

use super::*;
use crate::exprlang::parse;
use crate::geometry::{ComponentSpec, ShapeSpec, StructureSpec};
use crate::manufactured;

fn build(spec: &StructureSpec) -> Arc<Structure> {
    Arc::new(Structure::build(spec).unwrap())
}

fn system(st: &Arc<Structure>, f: &str) -> LinearSystem {
    let space = FunctionSpace::new(st.clone());
    let relaxed = relaxation::relax(&MatrixField::identity(), st).unwrap();
    assemble(&space, &relaxed, &Load::uniform(parse(f).unwrap(), st.components.len()), None).unwrap()
}

fn symmetric_segment(h: f64) -> StructureSpec {
    StructureSpec::new(vec![ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [-1.0, 1.0])], h)
}

#[test]
fn kernel_group_examples() {
    assert_eq!(kernel_groups(&build(&StructureSpec::two_discs(0.25))), vec![vec![0, 1]]);
    assert_eq!(kernel_groups(&build(&StructureSpec::segment_through_plate(0.25))), vec![vec![0], vec![1]]);
    let three = StructureSpec::new(
        (0..3).map(|k| ComponentSpec::segment(k + 1, [0.0, k as f64, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0])).collect(),
        0.25,
    );
    assert_eq!(kernel_groups(&build(&three)).len(), 3);
}

#[test]
fn segment_stiffness_is_textbook_stencil() {
    let h = 0.25;
    let sys = system(&build(&symmetric_segment(h)), "0");
    let a = sys.a.to_dense();
    let n = a.len();
    assert_eq!(n, 9);
    for (i, row) in a.iter().enumerate() {
        let boundary = i == 0 || i == n - 1;
        let diag = if boundary { 1.0 / h } else { 2.0 / h };
        assert!((row[i] - diag).abs() < 1e-12);
        for (j, v) in row.iter().enumerate() {
            if i.abs_diff(j) == 1 {
                assert!((v + 1.0 / h).abs() < 1e-12);
            } else if i != j {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn crossed_segments_origin_row_has_four_elements() {
    let st = build(&StructureSpec::crossed_segments(0.25));
    let sys = system(&st, "0");
    let origin = (0..st.meshes[0].n_nodes())
        .find(|&n| linalg::norm(st.meshes[0].points[n]) < 1e-12)
        .map(|n| sys.space.dofmap.node_dof[0][n])
        .unwrap();
    let row: Vec<usize> = (0..sys.a.n).filter(|&j| sys.a.get(origin, j) != 0.0).collect();
    assert_eq!(row.len(), 5);
    assert!((sys.a.get(origin, origin) - 4.0 / 0.25).abs() < 1e-12);
}

#[test]
fn conservation_and_symmetry() {
    for spec in [
        StructureSpec::two_discs(0.25),
        StructureSpec::crossed_plates(0.25),
        StructureSpec::segment_through_plate(0.25),
    ] {
        let sys = system(&build(&spec), "0");
        assert!(sys.a.asymmetry() < 1e-12);
        for chi in &sys.groups.chi {
            assert!(sys.a.matvec(chi).iter().all(|v| v.abs() <= 1e-12));
        }
    }
}

#[test]
fn compatibility_examples() {
    let plates = build(&StructureSpec::crossed_plates(0.2));
    let sys = system(&plates, "2*pi^2*cos(pi*x)*cos(pi*y)");
    assert!(sys.compatibility_residuals()[0].abs() < 1e-10);

    let sys = system(&plates, "1");
    let r = sys.compatibility_residuals();
    assert!((r[0] - 8.0).abs() < 1e-10);
    assert!(matches!(sys.compatibility_check(None), Err(SolverError::IncompatibleRhs { .. })));

    let sys = system(&build(&symmetric_segment(0.1)), "x");
    assert!(sys.compatibility_check(None).is_ok());
}

#[test]
fn zero_load_gives_zero_solution() {
    let st = build(&StructureSpec::two_discs(0.25));
    let (u, report) =
        solve(&st, &MatrixField::identity(), &Load::uniform(parse("0").unwrap(), 2), &SolveOptions::default()).unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
    assert!(report.iterations <= 1);
}

#[test]
fn initial_guess_shift_is_projected_away() {
    let st = build(&StructureSpec::crossed_segments(0.1));
    let exact = [parse("cos(pi*x)").unwrap(), parse("cos(pi*z)").unwrap()];
    let data = manufactured::manufacture(&st, &MatrixField::identity(), &exact).unwrap();
    let space = FunctionSpace::new(st.clone());
    let relaxed = relaxation::relax(&MatrixField::identity(), &st).unwrap();
    let sys = assemble(&space, &relaxed, &data.load, None).unwrap();
    let opts = SolveOptions { tol: 1e-12, ..SolveOptions::default() };
    let (u0, _) = solve_neumann(&sys, &opts, None).unwrap();
    let shifted: Vec<f64> = sys.groups.chi[0].iter().map(|c| 3.0 * c).collect();
    let (u1, report) = solve_neumann(&sys, &opts, Some(&shifted)).unwrap();
    let diff = u0.values.iter().zip(&u1.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-9);
    assert!(report.group_means[0].abs() < 1e-12);
}

#[test]
fn galerkin_residual_is_small() {
    let st = build(&StructureSpec::two_discs(0.2));
    let exact = [parse("cos(pi*x)*cos(pi*y)").unwrap(), parse("cos(pi*z)*cos(pi*y)").unwrap()];
    let data = manufactured::manufacture(&st, &MatrixField::identity(), &exact).unwrap();
    let space = FunctionSpace::new(st.clone());
    let relaxed = relaxation::relax(&MatrixField::identity(), &st).unwrap();
    let sys = assemble(&space, &relaxed, &data.load, None).unwrap();
    let opts = SolveOptions { tol: 1e-11, compat_tol: Some(1e-2), maxiter: None };
    let (u, _) = solve_neumann(&sys, &opts, None).unwrap();
    let mut r: Vec<f64> = sys.f.iter().zip(sys.a.matvec(&u.values)).map(|(f, a)| f - a).collect();
    sys.project_dual(&mut r);
    let mut f = sys.f.clone();
    sys.project_dual(&mut f);
    assert!(norm(&r) <= 1e-11 * norm(&f) * 1.0001);
}

#[test]
fn manufactured_errors_shrink_quadratically() {
    let exact = [parse("cos(pi*x)").unwrap(), parse("cos(pi*z)").unwrap()];
    let errs: Vec<f64> = [0.1, 0.05]
        .iter()
        .map(|&h| {
            let st = build(&StructureSpec::crossed_segments(h));
            manufactured::solve_manufactured(&st, &MatrixField::identity(), &exact, &SolveOptions::default())
                .unwrap()
                .errors
                .l2
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(order > 1.9, "order {order}");
}

#[test]
fn segment_poincare_constant() {
    let st = build(&StructureSpec::unit_segment(0.02));
    let sys = system(&st, "0");
    let est = poincare_constant(&sys, 0, 7).unwrap();
    let c = 1.0 / std::f64::consts::PI.powi(2);
    assert!((est.constant - c).abs() / c < 0.01);
}

#[test]
fn disconnected_groups_get_independent_constants() {
    let spec = StructureSpec::new(
        vec![
            ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0]),
            ComponentSpec::segment(2, [0.0, 2.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0]),
        ],
        0.05,
    );
    let sys = system(&build(&spec), "0");
    let c0 = poincare_constant(&sys, 0, 1).unwrap().constant;
    let c1 = poincare_constant(&sys, 1, 1).unwrap().constant;
    assert!((c1 / c0 - 4.0).abs() < 0.02);
}

#[test]
fn penalty_space_duplicates_junction_dofs() {
    let st = build(&StructureSpec::crossed_plates(0.25));
    let space = FunctionSpace::with_coupling(st.clone(), crate::funcspace::Coupling::Broken);
    assert_eq!(space.n_dofs(), 2 * 81);
    let plate = StructureSpec::new(
        vec![ComponentSpec::plate(
            1,
            [0.0; 3],
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            ShapeSpec::Rectangle([[0.0, 0.0], [1.0, 1.0]]),
        )],
        0.25,
    );
    assert_eq!(FunctionSpace::new(build(&plate)).n_dofs(), 25);
}
