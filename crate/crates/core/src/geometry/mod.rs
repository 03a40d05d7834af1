//! Low-dimensional structures: flat segments and plates in R³ glued
//! transversally, their junctions, tangent frames and meshes.

mod junction;
pub(crate) mod mesh;
mod spec;

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{self, Expr, ExprError};
use crate::linalg::{self, Mat3, Vec3};

pub use junction::compute_junctions;
pub use mesh::{build_meshes, Mesh, QuadratureOrder};
pub use spec::{ComponentSpec, MeshSpec, ShapeSpec, StructureSpec};

/// Geometric incidence tolerance.
pub const INCIDENCE_TOL: f64 = 1e-10;
/// Orthonormality tolerance for component frames.
pub const ORTHONORMAL_TOL: f64 = 1e-12;
/// Minimum angle (radians) between tangent spaces at a junction.
pub const TRANSVERSAL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("components {0:?} share a common point")]
    TripleIntersection([u32; 3]),
    #[error("components {0} and {1} are not transversal: {2}")]
    NonTransversal(u32, u32, String),
    #[error("density of component {component} is {value} at {at:?}; it must be positive")]
    NonPositiveDensity { component: u32, value: f64, at: Vec3 },
    #[error("malformed shape of component {0}: {1}")]
    MalformedShape(u32, String),
    #[error("components {0} and {1} overlap on a set of full dimension")]
    DegenerateOverlap(u32, u32),
    #[error("junction between components {0} and {1} is not resolved by the meshes: {2}")]
    MeshConformityFailure(u32, u32, String),
    #[error("point {0:?} does not lie on the structure")]
    PointNotOnStructure(Vec3),
    #[error("junction of components {0} and {1} lies on the declared boundary of component {2}")]
    JunctionOnBoundary(u32, u32, u32),
    #[error("duplicate component id {0}")]
    DuplicateId(u32),
    #[error("structure has no components")]
    Empty,
    #[error("mesh size must be positive and finite, got {0}")]
    InvalidMeshSize(f64),
    #[error("density expression of component {0}: {1}")]
    Density(u32, ExprError),
}

impl GeometryError {
    /// Short name of the violated condition, as printed by `validate`.
    pub fn kind(&self) -> &'static str {
        match self {
            GeometryError::TripleIntersection(_) => "TripleIntersection",
            GeometryError::NonTransversal(..) => "NonTransversal",
            GeometryError::NonPositiveDensity { .. } => "NonPositiveDensity",
            GeometryError::MalformedShape(..) => "MalformedShape",
            GeometryError::DegenerateOverlap(..) => "DegenerateOverlap",
            GeometryError::MeshConformityFailure(..) => "MeshConformityFailure",
            GeometryError::PointNotOnStructure(_) => "PointNotOnStructure",
            GeometryError::JunctionOnBoundary(..) => "JunctionOnBoundary",
            GeometryError::DuplicateId(_) => "DuplicateId",
            GeometryError::Empty => "Empty",
            GeometryError::InvalidMeshSize(_) => "InvalidMeshSize",
            GeometryError::Density(..) => "DensityExpression",
        }
    }
}

/// Shape of a component in its local coordinates. Polygons are stored
/// counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Shape {
    Interval([f64; 2]),
    Polygon(Vec<[f64; 2]>),
}

impl Shape {
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        match self {
            Shape::Interval([a, b]) => vec![[*a, 0.0], [*b, 0.0]],
            Shape::Polygon(v) => v.clone(),
        }
    }

    /// Distance from a local point to the boundary of the shape.
    pub fn boundary_distance(&self, local: [f64; 2]) -> f64 {
        match self {
            Shape::Interval([a, b]) => (local[0] - a).abs().min((b - local[0]).abs()),
            Shape::Polygon(v) => {
                polygon_edges(v).map(|(p, q)| linalg::point_segment_dist2(local, p, q)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn contains(&self, local: [f64; 2], tol: f64) -> bool {
        match self {
            Shape::Interval([a, b]) => local[0] >= a - tol && local[0] <= b + tol && local[1].abs() <= tol,
            Shape::Polygon(v) => point_in_polygon(v, local) || self.boundary_distance(local) <= tol,
        }
    }

    /// Lebesgue measure (length or area) of the shape.
    pub fn measure(&self) -> f64 {
        match self {
            Shape::Interval([a, b]) => b - a,
            Shape::Polygon(v) => signed_area(v).abs(),
        }
    }
}

pub(crate) fn polygon_edges(v: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    (0..v.len()).map(move |k| (v[k], v[(k + 1) % v.len()]))
}

pub(crate) fn signed_area(v: &[[f64; 2]]) -> f64 {
    0.5 * polygon_edges(v).map(|(p, q)| linalg::cross2(p, q)).sum::<f64>()
}

/// Even-odd point-in-polygon test (boundary handling is left to callers).
pub(crate) fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    for (a, b) in polygon_edges(v) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = linalg::cross2(linalg::sub2(p2, p1), linalg::sub2(q1, p1));
    let d2 = linalg::cross2(linalg::sub2(p2, p1), linalg::sub2(q2, p1));
    let d3 = linalg::cross2(linalg::sub2(q2, q1), linalg::sub2(p1, q1));
    let d4 = linalg::cross2(linalg::sub2(q2, q1), linalg::sub2(p2, q1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    // collinear overlaps
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d.abs() <= 1e-14 && linalg::point_segment_dist2(c, a, b) <= 1e-14
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

fn polygon_is_simple(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// A flat component S_i: a segment or a planar polygon in R³.
#[derive(Debug, Clone)]
pub struct Component {
    pub id: u32,
    pub dim: usize,
    pub origin: Vec3,
    pub tangents: Vec<Vec3>,
    pub shape: Shape,
    pub density: Expr,
    pub density_text: String,
    /// Indices of shape vertices declared to lie on the outer boundary.
    pub boundary: Vec<usize>,
    /// Orthogonal projector onto the tangent space.
    pub projector: Mat3,
    /// Smallest density value observed at nodes and quadrature points.
    pub min_density: f64,
}

impl Component {
    fn from_spec(spec: &ComponentSpec, h: f64) -> Result<Self, GeometryError> {
        let id = spec.id;
        let dim = spec.dim as usize;
        if dim != 1 && dim != 2 {
            return Err(GeometryError::MalformedShape(id, format!("dimension must be 1 or 2, got {dim}")));
        }
        if spec.tangents.len() != dim {
            return Err(GeometryError::MalformedShape(
                id,
                format!("expected {dim} tangent vectors, got {}", spec.tangents.len()),
            ));
        }
        for (a, ta) in spec.tangents.iter().enumerate() {
            for (b, tb) in spec.tangents.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                if (linalg::dot(*ta, *tb) - want).abs() > ORTHONORMAL_TOL {
                    return Err(GeometryError::MalformedShape(id, "tangent vectors are not orthonormal".into()));
                }
            }
        }
        if spec.origin.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::MalformedShape(id, "origin is not finite".into()));
        }
        let shape = match (&spec.shape, dim) {
            (ShapeSpec::Interval([a, b]), 1) => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(GeometryError::MalformedShape(id, format!("empty interval [{a}, {b}]")));
                }
                Shape::Interval([*a, *b])
            }
            (ShapeSpec::Polygon(v), 2) => Shape::Polygon(normalize_polygon(id, v.clone())?),
            (ShapeSpec::Rectangle([lo, hi]), 2) => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    return Err(GeometryError::MalformedShape(id, "rectangle corners are not ordered".into()));
                }
                Shape::Polygon(vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
            }
            (ShapeSpec::Disc { center, radius }, 2) => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::MalformedShape(id, "disc radius must be positive".into()));
                }
                Shape::Polygon(disc_polygon(*center, *radius, h))
            }
            _ => {
                return Err(GeometryError::MalformedShape(id, format!("shape does not match dimension {dim}")));
            }
        };
        let n_vertices = shape.vertices().len();
        let boundary = match &spec.boundary {
            Some(list) => {
                if let Some(bad) = list.iter().find(|&&k| k >= n_vertices) {
                    return Err(GeometryError::MalformedShape(id, format!("boundary vertex {bad} out of range")));
                }
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                list
            }
            None => (0..n_vertices).collect(),
        };
        let density = exprlang::parse(&spec.density_expr).map_err(|e| GeometryError::Density(id, e))?;
        let (_, projector) = linalg::span_projector(&spec.tangents, 1e-12);
        Ok(Component {
            id,
            dim,
            origin: spec.origin,
            tangents: spec.tangents.clone(),
            shape,
            density,
            density_text: spec.density_expr.clone(),
            boundary,
            projector,
            min_density: f64::NAN,
        })
    }

    pub fn to_ambient(&self, local: [f64; 2]) -> Vec3 {
        let mut p = linalg::axpy(self.origin, local[0], self.tangents[0]);
        if self.dim == 2 {
            p = linalg::axpy(p, local[1], self.tangents[1]);
        }
        p
    }

    /// Local coordinates of the orthogonal projection of `p` onto the
    /// component's affine hull, and the distance from `p` to that hull.
    pub fn to_local(&self, p: Vec3) -> ([f64; 2], f64) {
        let d = linalg::sub(p, self.origin);
        let u = linalg::dot(d, self.tangents[0]);
        let v = if self.dim == 2 { linalg::dot(d, self.tangents[1]) } else { 0.0 };
        let off = linalg::dist(p, self.to_ambient([u, v]));
        ([u, v], off)
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let (local, off) = self.to_local(p);
        off <= tol && self.shape.contains(local, tol)
    }

    /// Unit normal of a plate.
    pub fn normal(&self) -> Option<Vec3> {
        (self.dim == 2).then(|| linalg::normalize(linalg::cross(self.tangents[0], self.tangents[1])))
    }

    pub fn measure(&self) -> f64 {
        self.shape.measure()
    }

    /// Distance (within the component) from a local point to the boundary.
    pub fn boundary_distance(&self, local: [f64; 2]) -> f64 {
        self.shape.boundary_distance(local)
    }

    /// Declared boundary as closed local-coordinate pieces (points for a
    /// segment, edges for a plate).
    fn declared_boundary(&self) -> Vec<([f64; 2], [f64; 2])> {
        let verts = self.shape.vertices();
        match self.dim {
            1 => self.boundary.iter().map(|&k| (verts[k], verts[k])).collect(),
            _ => {
                let n = verts.len();
                (0..n)
                    .filter(|k| self.boundary.contains(k) && self.boundary.contains(&((k + 1) % n)))
                    .map(|k| (verts[k], verts[(k + 1) % n]))
                    .collect()
            }
        }
    }

    fn on_declared_boundary(&self, p: Vec3) -> bool {
        let (local, off) = self.to_local(p);
        off <= INCIDENCE_TOL
            && self.declared_boundary().iter().any(|(a, b)| linalg::point_segment_dist2(local, *a, *b) <= INCIDENCE_TOL)
    }
}

fn normalize_polygon(id: u32, mut v: Vec<[f64; 2]>) -> Result<Vec<[f64; 2]>, GeometryError> {
    if v.len() < 3 {
        return Err(GeometryError::MalformedShape(id, "polygon needs at least 3 vertices".into()));
    }
    if v.iter().flatten().any(|c| !c.is_finite()) {
        return Err(GeometryError::MalformedShape(id, "polygon has non-finite vertices".into()));
    }
    let area = signed_area(&v);
    if area.abs() < 1e-14 {
        return Err(GeometryError::MalformedShape(id, "polygon has zero area".into()));
    }
    if !polygon_is_simple(&v) {
        return Err(GeometryError::MalformedShape(id, "polygon is self-intersecting".into()));
    }
    if area < 0.0 {
        v.reverse();
    }
    Ok(v)
}

/// Regular polygon inscribed in a disc, with a vertex count that is a
/// multiple of four so that the points on both coordinate axes are vertices.
fn disc_polygon(center: [f64; 2], radius: f64, h: f64) -> Vec<[f64; 2]> {
    let quarter = ((0.5 * PI * radius / h).ceil() as usize).max(4);
    let n = 4 * quarter;
    (0..n)
        .map(|k| {
            let (c, s) = if k % quarter == 0 {
                // exact axis points
                match k / quarter {
                    0 => (1.0, 0.0),
                    1 => (0.0, 1.0),
                    2 => (-1.0, 0.0),
                    _ => (0.0, -1.0),
                }
            } else {
                let t = 2.0 * PI * k as f64 / n as f64;
                (t.cos(), t.sin())
            };
            [center[0] + radius * c, center[1] + radius * s]
        })
        .collect()
}

/// Geometry of the intersection of two components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum JunctionGeom {
    Point(Vec3),
    Segment(Vec3, Vec3),
}

impl JunctionGeom {
    pub fn distance(&self, p: Vec3) -> f64 {
        match self {
            JunctionGeom::Point(q) => linalg::dist(p, *q),
            JunctionGeom::Segment(a, b) => linalg::point_segment_dist3(p, *a, *b),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            JunctionGeom::Point(_) => 0.0,
            JunctionGeom::Segment(a, b) => linalg::dist(*a, *b),
        }
    }

    /// Arclength parameter of `p` along the junction (0 for a point).
    pub fn param(&self, p: Vec3) -> f64 {
        match self {
            JunctionGeom::Point(_) => 0.0,
            JunctionGeom::Segment(a, b) => linalg::dot(linalg::sub(p, *a), linalg::normalize(linalg::sub(*b, *a))),
        }
    }

    fn min_distance(&self, other: &JunctionGeom) -> f64 {
        match (self, other) {
            (JunctionGeom::Point(p), g) | (g, JunctionGeom::Point(p)) => g.distance(*p),
            (JunctionGeom::Segment(a, b), JunctionGeom::Segment(c, d)) => linalg::segment_segment_dist3(*a, *b, *c, *d),
        }
    }
}

/// Intersection Σ_ij of two components. `first`/`second` index into
/// [`Structure::components`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Junction {
    pub first: usize,
    pub second: usize,
    pub ids: (u32, u32),
    pub geom: JunctionGeom,
    /// Local coordinates of the junction geometry (endpoints, or the point
    /// twice) in the first and second component.
    pub local: [[[f64; 2]; 2]; 2],
    pub coupled: bool,
}

impl Junction {
    pub fn involves(&self, component: usize) -> bool {
        self.first == component || self.second == component
    }

    pub fn other(&self, component: usize) -> usize {
        if self.first == component {
            self.second
        } else {
            self.first
        }
    }
}

/// Mesh nodes resolving a junction on both sides, ordered by arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionNodes {
    /// `(node on first component, node on second component)`.
    pub pairs: Vec<(usize, usize)>,
    pub params: Vec<f64>,
}

/// A validated low-dimensional structure with meshes.
#[derive(Debug, Clone)]
pub struct Structure {
    pub components: Vec<Component>,
    pub junctions: Vec<Junction>,
    pub meshes: Vec<Mesh>,
    pub junction_nodes: Vec<JunctionNodes>,
    pub h: f64,
}

/// Tangent space T_μ(x) at a point of the structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentFrame {
    pub point: Vec3,
    pub basis: Vec<Vec3>,
    pub projector: Mat3,
    pub normal_projector: Mat3,
}

impl TangentFrame {
    /// Frame spanned by the given vectors at `point`.
    pub fn from_vectors(point: Vec3, vectors: &[Vec3]) -> Self {
        let (basis, projector) = linalg::span_projector(vectors, 1e-10);
        let normal_projector = linalg::mat_add(&linalg::identity(), &projector, -1.0);
        TangentFrame { point, basis, projector, normal_projector }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

pub fn build_structure(spec: &StructureSpec) -> Result<Structure, GeometryError> {
    let h = spec.mesh.h;
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidMeshSize(h));
    }
    if spec.components.is_empty() {
        return Err(GeometryError::Empty);
    }
    let mut components = Vec::with_capacity(spec.components.len());
    for cs in &spec.components {
        if components.iter().any(|c: &Component| c.id == cs.id) {
            return Err(GeometryError::DuplicateId(cs.id));
        }
        components.push(Component::from_spec(cs, h)?);
    }
    let junctions = compute_junctions(&components)?;
    for j in &junctions {
        check_transversal(&components[j.first], &components[j.second])?;
    }
    check_no_triple_points(&components, &junctions)?;
    check_boundaries(&components, &junctions)?;
    let (meshes, junction_nodes) = build_meshes(&components, &junctions, h)?;
    for (comp, mesh) in components.iter_mut().zip(&meshes) {
        comp.min_density = sample_min_density(comp, mesh)?;
    }
    Ok(Structure { components, junctions, meshes, junction_nodes, h })
}

fn check_transversal(a: &Component, b: &Component) -> Result<(), GeometryError> {
    let (small, large) = if a.dim <= b.dim { (a, b) } else { (b, a) };
    // the smaller tangent space is nested iff each of its vectors lies in
    // the larger one up to the angle threshold
    let nested = small.tangents.iter().all(|t| {
        let residual = linalg::sub(*t, linalg::mat_vec(&large.projector, *t));
        linalg::norm(residual) < TRANSVERSAL_ANGLE.sin()
    });
    if nested {
        return Err(GeometryError::NonTransversal(a.id, b.id, "tangent spaces are nested".into()));
    }
    Ok(())
}

fn check_no_triple_points(components: &[Component], junctions: &[Junction]) -> Result<(), GeometryError> {
    for (a, ja) in junctions.iter().enumerate() {
        for jb in &junctions[a + 1..] {
            let shared = [ja.first, ja.second].into_iter().find(|c| jb.involves(*c));
            if let Some(c) = shared {
                if ja.geom.min_distance(&jb.geom) <= INCIDENCE_TOL {
                    let mut ids = [components[ja.other(c)].id, components[c].id, components[jb.other(c)].id];
                    ids.sort_unstable();
                    return Err(GeometryError::TripleIntersection(ids));
                }
            }
        }
    }
    Ok(())
}

fn check_boundaries(components: &[Component], junctions: &[Junction]) -> Result<(), GeometryError> {
    for j in junctions {
        for &c in &[j.first, j.second] {
            let comp = &components[c];
            let hit = match &j.geom {
                JunctionGeom::Point(p) => comp.on_declared_boundary(*p),
                JunctionGeom::Segment(a, b) => {
                    let mid = linalg::scale(linalg::add(*a, *b), 0.5);
                    comp.on_declared_boundary(mid)
                }
            };
            if hit {
                return Err(GeometryError::JunctionOnBoundary(j.ids.0, j.ids.1, comp.id));
            }
        }
    }
    Ok(())
}

fn sample_min_density(comp: &Component, mesh: &Mesh) -> Result<f64, GeometryError> {
    let mut min = f64::INFINITY;
    let mut check = |p: Vec3| -> Result<(), GeometryError> {
        let v = comp.density.eval_at(p).map_err(|e| GeometryError::Density(comp.id, e))?;
        if !(v > 0.0) {
            return Err(GeometryError::NonPositiveDensity { component: comp.id, value: v, at: p });
        }
        min = min.min(v);
        Ok(())
    };
    for p in &mesh.points {
        check(*p)?;
    }
    for e in 0..mesh.n_elements() {
        for (p, _) in mesh.quadrature(e, QuadratureOrder::Standard) {
            check(p)?;
        }
    }
    Ok(min)
}

impl Structure {
    pub fn build(spec: &StructureSpec) -> Result<Self, GeometryError> {
        build_structure(spec)
    }

    pub fn component_index(&self, id: u32) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    /// T_μ(x): the sum of the tangent spaces of all components through `x`.
    pub fn tangent_frame_at(&self, x: Vec3) -> Result<TangentFrame, GeometryError> {
        let vectors: Vec<Vec3> = self
            .components
            .iter()
            .filter(|c| c.contains(x, INCIDENCE_TOL))
            .flat_map(|c| c.tangents.iter().copied())
            .collect();
        if vectors.is_empty() {
            return Err(GeometryError::PointNotOnStructure(x));
        }
        Ok(TangentFrame::from_vectors(x, &vectors))
    }

    pub fn n_nodes(&self) -> usize {
        self.meshes.iter().map(|m| m.points.len()).sum()
    }
}

#[cfg(test)]
mod tests;
