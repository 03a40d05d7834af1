use super::*;

fn close(a: Vec3, b: Vec3) -> bool {
    linalg::dist(a, b) < 1e-12
}

fn segment_ends(j: &Junction) -> (Vec3, Vec3) {
    match j.geom {
        JunctionGeom::Segment(a, b) => (a, b),
        JunctionGeom::Point(p) => panic!("expected a segment junction, got point {p:?}"),
    }
}

#[test]
fn two_discs_meet_along_a_coupled_segment() {
    let st = Structure::build(&StructureSpec::two_discs(0.2)).unwrap();
    assert_eq!(st.junctions.len(), 1);
    let j = &st.junctions[0];
    assert!(j.coupled);
    let (a, b) = segment_ends(j);
    assert!(
        close(a, [0.0, -1.0, 0.0]) && close(b, [0.0, 1.0, 0.0])
            || close(a, [0.0, 1.0, 0.0]) && close(b, [0.0, -1.0, 0.0])
    );
    // same vertex sequence on both discs
    let nodes = &st.junction_nodes[0];
    assert!(nodes.pairs.len() >= 11);
    for &(n1, n2) in &nodes.pairs {
        assert!(linalg::dist(st.meshes[0].points[n1], st.meshes[1].points[n2]) < 1e-10);
    }
}

#[test]
fn crossed_segments_meet_at_origin() {
    let st = Structure::build(&StructureSpec::crossed_segments(0.5)).unwrap();
    assert_eq!(st.junctions.len(), 1);
    assert!(st.junctions[0].coupled);
    assert_eq!(st.junctions[0].geom, JunctionGeom::Point([0.0; 3]));
    for mesh in &st.meshes {
        assert!(mesh.points.iter().any(|p| linalg::norm(*p) == 0.0));
        assert!(mesh.edges().iter().all(|[a, b]| linalg::dist(mesh.points[*a], mesh.points[*b]) <= 0.5 + 1e-12));
    }
}

#[test]
fn segment_through_plate_is_uncoupled() {
    let st = Structure::build(&StructureSpec::segment_through_plate(0.25)).unwrap();
    assert_eq!(st.junctions.len(), 1);
    assert!(!st.junctions[0].coupled);
    assert_eq!(st.junctions[0].geom, JunctionGeom::Point([0.0; 3]));
}

#[test]
fn crossed_plate_grids_share_nine_nodes() {
    let st = Structure::build(&StructureSpec::crossed_plates(0.25)).unwrap();
    assert_eq!(st.meshes[0].n_nodes(), 81);
    assert_eq!(st.meshes[1].n_nodes(), 81);
    assert_eq!(st.junction_nodes[0].pairs.len(), 9);
    for mesh in &st.meshes {
        let longest =
            mesh.edges().iter().map(|[a, b]| linalg::dist(mesh.points[*a], mesh.points[*b])).fold(0.0, f64::max);
        assert!(longest <= 0.25 * 2f64.sqrt() + 1e-12);
    }
}

#[test]
fn parallel_plates_do_not_meet() {
    let unit = ShapeSpec::Rectangle([[0.0, 0.0], [1.0, 1.0]]);
    let spec = StructureSpec::new(
        vec![
            ComponentSpec::plate(1, [0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], unit.clone()),
            ComponentSpec::plate(2, [0.0, 0.0, 1.0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], unit),
        ],
        0.5,
    );
    assert!(Structure::build(&spec).unwrap().junctions.is_empty());
}

#[test]
fn coincident_segments_overlap() {
    let spec = StructureSpec::new(
        vec![
            ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [-1.0, 1.0]),
            ComponentSpec::segment(2, [0.0; 3], [1.0, 0.0, 0.0], [-1.0, 1.0]),
        ],
        0.5,
    );
    assert!(matches!(Structure::build(&spec), Err(GeometryError::DegenerateOverlap(1, 2))));
}

#[test]
fn three_plates_through_one_point() {
    let sq = ShapeSpec::Rectangle([[-1.0, -1.0], [1.0, 1.0]]);
    let spec = StructureSpec::new(
        vec![
            ComponentSpec::plate(1, [0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], sq.clone()),
            ComponentSpec::plate(2, [0.0; 3], [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], sq.clone()),
            ComponentSpec::plate(3, [0.0; 3], [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], sq),
        ],
        0.5,
    );
    let err = Structure::build(&spec).unwrap_err();
    assert_eq!(err.kind(), "TripleIntersection");
}

#[test]
fn negative_density_is_rejected() {
    let mut spec = StructureSpec::unit_plate(0.5);
    spec.components[0] = spec.components[0].clone().with_density("-1");
    assert_eq!(Structure::build(&spec).unwrap_err().kind(), "NonPositiveDensity");
}

#[test]
fn segment_inside_plate_is_not_transversal() {
    let spec = StructureSpec::new(
        vec![
            ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [-0.5, 0.5]),
            ComponentSpec::plate(
                2,
                [0.0; 3],
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                ShapeSpec::Rectangle([[-1.0, -1.0], [1.0, 1.0]]),
            ),
        ],
        0.5,
    );
    assert!(Structure::build(&spec).is_err());
}

#[test]
fn self_intersecting_polygon_is_malformed() {
    let bow = ShapeSpec::Polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
    let spec =
        StructureSpec::new(vec![ComponentSpec::plate(1, [0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], bow)], 0.5);
    assert_eq!(Structure::build(&spec).unwrap_err().kind(), "MalformedShape");
}

#[test]
fn non_orthonormal_tangents_are_malformed() {
    let spec = StructureSpec::new(vec![ComponentSpec::segment(1, [0.0; 3], [1.0, 1e-6, 0.0], [0.0, 1.0])], 0.5);
    assert_eq!(Structure::build(&spec).unwrap_err().kind(), "MalformedShape");
}

#[test]
fn tangent_frame_examples() {
    let discs = Structure::build(&StructureSpec::two_discs(0.25)).unwrap();
    let f = discs.tangent_frame_at([0.5, 0.0, 0.0]).unwrap();
    assert_eq!(f.rank(), 2);
    assert!(linalg::max_abs_diff(&f.projector, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]) < 1e-12);

    let f = discs.tangent_frame_at([0.0, 0.5, 0.0]).unwrap();
    assert_eq!(f.rank(), 3);
    assert!(linalg::max_abs_diff(&f.projector, &linalg::identity()) < 1e-12);
    // oracle: classical Gram-Schmidt of the stacked tangents
    let mut basis: Vec<Vec3> = Vec::new();
    for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let mut w = v;
        for b in &basis {
            w = linalg::axpy(w, -linalg::dot(w, *b), *b);
        }
        if linalg::norm(w) > 1e-10 {
            basis.push(linalg::scale(w, 1.0 / linalg::norm(w)));
        }
    }
    assert_eq!(basis.len(), f.rank());

    let segs = Structure::build(&StructureSpec::crossed_segments(0.5)).unwrap();
    let f = segs.tangent_frame_at([0.0; 3]).unwrap();
    assert_eq!(f.rank(), 2);
    assert!(linalg::max_abs_diff(&f.projector, &[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]) < 1e-12);

    assert!(matches!(segs.tangent_frame_at([0.0, 1.0, 0.0]), Err(GeometryError::PointNotOnStructure(_))));
}

#[test]
fn projector_identities() {
    let st = Structure::build(&StructureSpec::two_discs(0.25)).unwrap();
    for p in [[0.3, 0.2, 0.0], [0.0, -0.4, 0.6], [0.0, 0.1, 0.0]] {
        let f = st.tangent_frame_at(p).unwrap();
        let sq = linalg::mat_mul(&f.projector, &f.projector);
        assert!(linalg::max_abs_diff(&sq, &f.projector) < 1e-12);
        let sum = linalg::mat_add(&f.projector, &f.normal_projector, 1.0);
        assert!(linalg::max_abs_diff(&sum, &linalg::identity()) < 1e-12);
    }
    for (c, comp) in st.components.iter().enumerate() {
        let p = st.meshes[c].points.iter().copied().find(|p| st.junctions[0].geom.distance(*p) > 0.3).unwrap();
        let f = st.tangent_frame_at(p).unwrap();
        assert!(linalg::max_abs_diff(&f.projector, &comp.projector) < 1e-12);
    }
}

#[test]
fn build_is_deterministic() {
    let a = Structure::build(&StructureSpec::two_discs(0.15)).unwrap();
    let b = Structure::build(&StructureSpec::two_discs(0.15)).unwrap();
    for (ma, mb) in a.meshes.iter().zip(&b.meshes) {
        assert_eq!(ma.points, mb.points);
        assert_eq!(ma.elements, mb.elements);
    }
    assert_eq!(a.junction_nodes, b.junction_nodes);
}

#[test]
fn disc_meshes_cover_the_disc() {
    let st = Structure::build(&StructureSpec::two_discs(0.1)).unwrap();
    for mesh in &st.meshes {
        let area: f64 = (0..mesh.n_elements()).map(|e| mesh.measure(e)).sum();
        assert!((area - std::f64::consts::PI).abs() < 0.02);
        assert!((0..mesh.n_elements()).all(|e| mesh.measure(e) > 0.0));
    }
}
