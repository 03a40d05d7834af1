//! Pairwise intersections of flat components.

use super::{Component, GeometryError, Junction, JunctionGeom, Shape, INCIDENCE_TOL, TRANSVERSAL_ANGLE};
use crate::linalg::{self, Vec3};

/// All nonempty pairwise intersections, in lexicographic order of the
/// component pair.
pub fn compute_junctions(components: &[Component]) -> Result<Vec<Junction>, GeometryError> {
    let mut out = Vec::new();
    for i in 0..components.len() {
        for j in i + 1..components.len() {
            if let Some(geom) = intersect(&components[i], &components[j])? {
                let local = |c: &Component| -> [[f64; 2]; 2] {
                    match &geom {
                        JunctionGeom::Point(p) => {
                            let l = c.to_local(*p).0;
                            [l, l]
                        }
                        JunctionGeom::Segment(a, b) => [c.to_local(*a).0, c.to_local(*b).0],
                    }
                };
                out.push(Junction {
                    first: i,
                    second: j,
                    ids: (components[i].id, components[j].id),
                    local: [local(&components[i]), local(&components[j])],
                    coupled: components[i].dim == components[j].dim,
                    geom,
                });
            }
        }
    }
    Ok(out)
}

/// Closed parameter intervals `[lo, hi]` along a line (points have lo == hi).
type Pieces = Vec<[f64; 2]>;

fn intersect(a: &Component, b: &Component) -> Result<Option<JunctionGeom>, GeometryError> {
    match (a.dim, b.dim) {
        (1, 1) => segment_segment(a, b),
        (1, 2) => segment_plate(a, b),
        (2, 1) => segment_plate(b, a),
        _ => plate_plate(a, b),
    }
}

fn interval(c: &Component) -> [f64; 2] {
    match c.shape {
        Shape::Interval(iv) => iv,
        Shape::Polygon(_) => unreachable!("segment component with polygon shape"),
    }
}

fn polygon(c: &Component) -> &[[f64; 2]] {
    match &c.shape {
        Shape::Polygon(v) => v,
        Shape::Interval(_) => unreachable!("plate component with interval shape"),
    }
}

fn intersect_pieces(a: &Pieces, b: &Pieces) -> Pieces {
    let mut out = Vec::new();
    for p in a {
        for q in b {
            let lo = p[0].max(q[0]);
            let hi = p[1].min(q[1]);
            if lo <= hi + INCIDENCE_TOL {
                out.push([lo, hi.max(lo)]);
            }
        }
    }
    out.sort_by(|x, y| x[0].total_cmp(&y[0]));
    let mut merged: Pieces = Vec::new();
    for p in out {
        match merged.last_mut() {
            Some(last) if p[0] <= last[1] + INCIDENCE_TOL => last[1] = last[1].max(p[1]),
            _ => merged.push(p),
        }
    }
    merged
}

/// Where the line `p + t·u` (local coordinates, `u` unit) meets the
/// closed polygon.
fn clip_line(poly: &[[f64; 2]], p: [f64; 2], u: [f64; 2]) -> Pieces {
    let n = poly.len();
    let side = |v: [f64; 2]| linalg::cross2(u, linalg::sub2(v, p));
    let param = |v: [f64; 2]| linalg::dot2(linalg::sub2(v, p), u);
    let mut ts = Vec::new();
    for k in 0..n {
        let v0 = poly[k];
        let v1 = poly[(k + 1) % n];
        let (s0, s1) = (side(v0), side(v1));
        if s0.abs() <= INCIDENCE_TOL {
            ts.push(param(v0));
        }
        if (s0 > INCIDENCE_TOL && s1 < -INCIDENCE_TOL) || (s0 < -INCIDENCE_TOL && s1 > INCIDENCE_TOL) {
            let w = s0 / (s0 - s1);
            let x = [v0[0] + w * (v1[0] - v0[0]), v0[1] + w * (v1[1] - v0[1])];
            ts.push(param(x));
        }
    }
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup_by(|a, b| (*a - *b).abs() <= INCIDENCE_TOL);
    let shape = Shape::Polygon(poly.to_vec());
    let inside = |t: f64| shape.contains([p[0] + t * u[0], p[1] + t * u[1]], INCIDENCE_TOL);
    let mut pieces: Pieces = Vec::new();
    for w in ts.windows(2) {
        if inside(0.5 * (w[0] + w[1])) {
            match pieces.last_mut() {
                Some(last) if (last[1] - w[0]).abs() <= INCIDENCE_TOL => last[1] = w[1],
                _ => pieces.push([w[0], w[1]]),
            }
        }
    }
    // isolated touching points
    for &t in &ts {
        let covered = pieces.iter().any(|q| t >= q[0] - INCIDENCE_TOL && t <= q[1] + INCIDENCE_TOL);
        if !covered {
            pieces.push([t, t]);
        }
    }
    pieces.sort_by(|x, y| x[0].total_cmp(&y[0]));
    pieces
}

/// Turns the pieces of a line/line-type intersection into a junction.
/// `dim_of_overlap_is_full` marks the case where a segment lies inside the
/// other component's affine hull, so any overlap of positive length
/// covers a set of the segment's own dimension.
fn classify(
    a: &Component,
    b: &Component,
    pieces: Pieces,
    origin: Vec3,
    dir: Vec3,
    overlap_is_full_dim: bool,
) -> Result<Option<JunctionGeom>, GeometryError> {
    if pieces.is_empty() {
        return Ok(None);
    }
    if pieces.len() > 1 {
        return Err(GeometryError::MalformedShape(
            a.id,
            format!("intersection with component {} is disconnected", b.id),
        ));
    }
    let [lo, hi] = pieces[0];
    let start = linalg::axpy(origin, lo, dir);
    let end = linalg::axpy(origin, hi, dir);
    if hi - lo <= INCIDENCE_TOL {
        return Err(GeometryError::NonTransversal(a.id, b.id, "components touch at a single point".into()));
    }
    if overlap_is_full_dim {
        return Err(GeometryError::DegenerateOverlap(a.id, b.id));
    }
    Ok(Some(JunctionGeom::Segment(start, end)))
}

fn parallel(u: Vec3, v: Vec3) -> bool {
    linalg::norm(linalg::cross(u, v)) < TRANSVERSAL_ANGLE.sin()
}

fn segment_segment(a: &Component, b: &Component) -> Result<Option<JunctionGeom>, GeometryError> {
    let (d1, d2) = (a.tangents[0], b.tangents[0]);
    let [a0, a1] = interval(a);
    let [b0, b1] = interval(b);
    if parallel(d1, d2) {
        let (_, off) = a.to_local(b.origin);
        if off > INCIDENCE_TOL {
            return Ok(None);
        }
        // collinear: compare parameter ranges along a's line
        let s0 = a.to_local(b.to_ambient([b0, 0.0])).0[0];
        let s1 = a.to_local(b.to_ambient([b1, 0.0])).0[0];
        let pieces = intersect_pieces(&vec![[a0, a1]], &vec![[s0.min(s1), s0.max(s1)]]);
        if pieces.is_empty() {
            return Ok(None);
        }
        let [lo, hi] = pieces[0];
        if hi - lo <= INCIDENCE_TOL {
            return Err(GeometryError::NonTransversal(a.id, b.id, "collinear segments touch".into()));
        }
        return Err(GeometryError::DegenerateOverlap(a.id, b.id));
    }
    // closest points of the two lines
    let w0 = linalg::sub(a.origin, b.origin);
    let bb = linalg::dot(d1, d2);
    let d = linalg::dot(d1, w0);
    let e = linalg::dot(d2, w0);
    let denom = 1.0 - bb * bb;
    let s = (bb * e - d) / denom;
    let t = (e - bb * d) / denom;
    let p = linalg::axpy(a.origin, s, d1);
    let q = linalg::axpy(b.origin, t, d2);
    if linalg::dist(p, q) > INCIDENCE_TOL {
        return Ok(None);
    }
    let within = |v: f64, lo: f64, hi: f64| v >= lo - INCIDENCE_TOL && v <= hi + INCIDENCE_TOL;
    if within(s, a0, a1) && within(t, b0, b1) {
        Ok(Some(JunctionGeom::Point(snap(linalg::scale(linalg::add(p, q), 0.5)))))
    } else {
        Ok(None)
    }
}

fn segment_plate(seg: &Component, plate: &Component) -> Result<Option<JunctionGeom>, GeometryError> {
    let n = plate.normal().expect("plate has a normal");
    let d = seg.tangents[0];
    let [a0, a1] = interval(seg);
    if linalg::dot(d, n).abs() < TRANSVERSAL_ANGLE.sin() {
        let (_, off) = plate.to_local(seg.origin);
        if off > INCIDENCE_TOL {
            return Ok(None);
        }
        let (p, _) = plate.to_local(seg.origin);
        let u = [linalg::dot(d, plate.tangents[0]), linalg::dot(d, plate.tangents[1])];
        let pieces = intersect_pieces(&clip_line(polygon(plate), p, u), &vec![[a0, a1]]);
        return classify(seg, plate, pieces, seg.origin, d, true);
    }
    let s = linalg::dot(linalg::sub(plate.origin, seg.origin), n) / linalg::dot(d, n);
    if s < a0 - INCIDENCE_TOL || s > a1 + INCIDENCE_TOL {
        return Ok(None);
    }
    let x = snap(linalg::axpy(seg.origin, s, d));
    if plate.contains(x, INCIDENCE_TOL) {
        Ok(Some(JunctionGeom::Point(x)))
    } else {
        Ok(None)
    }
}

fn plate_plate(a: &Component, b: &Component) -> Result<Option<JunctionGeom>, GeometryError> {
    let n1 = a.normal().expect("plate has a normal");
    let n2 = b.normal().expect("plate has a normal");
    let c = linalg::cross(n1, n2);
    if linalg::norm(c) < TRANSVERSAL_ANGLE.sin() {
        let (_, off) = a.to_local(b.origin);
        if off > INCIDENCE_TOL {
            return Ok(None);
        }
        // coplanar: any contact is an overlap of full dimension or a
        // non-transversal touch; either way the pair is rejected
        let pa = polygon(a);
        let pb: Vec<[f64; 2]> = polygon(b).iter().map(|v| a.to_local(b.to_ambient(*v)).0).collect();
        let shape_a = Shape::Polygon(pa.to_vec());
        let shape_b = Shape::Polygon(pb.clone());
        let touching = pb.iter().any(|v| shape_a.contains(*v, INCIDENCE_TOL))
            || pa.iter().any(|v| shape_b.contains(*v, INCIDENCE_TOL))
            || super::polygon_edges(pa)
                .any(|(p, q)| super::polygon_edges(&pb).any(|(r, s)| super::segments_cross(p, q, r, s)));
        return if touching { Err(GeometryError::DegenerateOverlap(a.id, b.id)) } else { Ok(None) };
    }
    let mut dir = linalg::normalize(c);
    // orient deterministically: largest component positive
    let k = (0..3).max_by(|&i, &j| dir[i].abs().total_cmp(&dir[j].abs())).unwrap_or(0);
    if dir[k] < 0.0 {
        dir = linalg::scale(dir, -1.0);
    }
    // point on both planes closest to a's origin
    let d1 = linalg::dot(n1, a.origin);
    let d2 = linalg::dot(n2, b.origin);
    let cc = linalg::dot(c, c);
    let x0 = linalg::scale(
        linalg::add(linalg::scale(linalg::cross(n2, c), d1), linalg::scale(linalg::cross(c, n1), d2)),
        1.0 / cc,
    );
    let x0 = snap(linalg::axpy(x0, -linalg::dot(linalg::sub(x0, a.origin), dir), dir));
    let clip = |comp: &Component| {
        let (p, _) = comp.to_local(x0);
        let u = [linalg::dot(dir, comp.tangents[0]), linalg::dot(dir, comp.tangents[1])];
        clip_line(polygon(comp), p, u)
    };
    let pieces = intersect_pieces(&clip(a), &clip(b));
    classify(a, b, pieces, x0, dir, false)
}

/// Rounds coordinates that are within rounding noise of zero.
fn snap(p: Vec3) -> Vec3 {
    p.map(|v| if v.abs() < 1e-14 { 0.0 } else { v })
}
