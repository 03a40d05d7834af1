//! P1 meshes of the components, conforming across junctions.

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{Component, GeometryError, Junction, JunctionGeom, JunctionNodes, Shape, INCIDENCE_TOL};
use crate::linalg::{self, Vec3};

/// Quadrature accuracy. `Standard` integrates polynomials of degree 2
/// exactly on each element; `High` is used for error norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureOrder {
    Standard,
    High,
    /// The high rule on each half of a segment or quarter of a triangle.
    Refined,
}

const GAUSS2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];

pub(crate) const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

fn triangle_rule(order: QuadratureOrder) -> Vec<([f64; 3], f64)> {
    match order {
        QuadratureOrder::Standard => {
            vec![([0.5, 0.5, 0.0], 1.0 / 3.0), ([0.0, 0.5, 0.5], 1.0 / 3.0), ([0.5, 0.0, 0.5], 1.0 / 3.0)]
        }
        QuadratureOrder::High | QuadratureOrder::Refined => {
            let (a1, b1, w1) = (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506);
            let (a2, b2, w2) = (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827);
            vec![
                ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
                ([a1, b1, b1], w1),
                ([b1, a1, b1], w1),
                ([b1, b1, a1], w1),
                ([a2, b2, b2], w2),
                ([b2, a2, b2], w2),
                ([b2, b2, a2], w2),
            ]
        }
    }
}

/// Simplicial mesh of one component. Nodes carry both local (in-component)
/// and ambient coordinates; segment elements use the first two entries of
/// each connectivity triple.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub local: Vec<[f64; 2]>,
    pub points: Vec<Vec3>,
    pub elements: Vec<[usize; 3]>,
    /// Boundary facets: edges of a plate mesh, or `[n, n]` end nodes of a
    /// segment mesh.
    pub boundary_facets: Vec<[usize; 2]>,
    grads: Vec<[Vec3; 3]>,
    measures: Vec<f64>,
    buckets: Buckets,
}

#[derive(Debug, Clone, Default)]
struct Buckets {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Mesh {
    fn new(dim: usize, local: Vec<[f64; 2]>, comp: &Component, elements: Vec<[usize; 3]>) -> Self {
        let points: Vec<Vec3> = local.iter().map(|l| comp.to_ambient(*l)).collect();
        let mut grads = Vec::with_capacity(elements.len());
        let mut measures = Vec::with_capacity(elements.len());
        for el in &elements {
            let (g, m) = if dim == 1 {
                let e = linalg::sub(points[el[1]], points[el[0]]);
                let l2 = linalg::dot(e, e);
                let g1 = linalg::scale(e, 1.0 / l2);
                ([linalg::scale(g1, -1.0), g1, linalg::ZERO3], l2.sqrt())
            } else {
                let e1 = linalg::sub(points[el[1]], points[el[0]]);
                let e2 = linalg::sub(points[el[2]], points[el[0]]);
                let (a, b, c) = (linalg::dot(e1, e1), linalg::dot(e1, e2), linalg::dot(e2, e2));
                let det = a * c - b * b;
                let g1 = linalg::scale(linalg::axpy(linalg::scale(e1, c), -b, e2), 1.0 / det);
                let g2 = linalg::scale(linalg::axpy(linalg::scale(e2, a), -b, e1), 1.0 / det);
                ([linalg::scale(linalg::add(g1, g2), -1.0), g1, g2], 0.5 * det.sqrt())
            };
            grads.push(g);
            measures.push(m);
        }
        let boundary_facets = if dim == 1 {
            let first = elements[0][0];
            let last = elements[elements.len() - 1][1];
            vec![[first, first], [last, last]]
        } else {
            let mut count: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
            for el in &elements {
                for k in 0..3 {
                    let (a, b) = (el[k], el[(k + 1) % 3]);
                    *count.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            count.into_iter().filter(|(_, c)| *c == 1).map(|((a, b), _)| [a, b]).collect()
        };
        let mut mesh =
            Mesh { dim, local, points, elements, boundary_facets, grads, measures, buckets: Buckets::default() };
        if dim == 2 {
            mesh.buckets = mesh.build_buckets();
        }
        mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Node indices of element `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    /// Length or area of element `e`.
    pub fn measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    /// Ambient gradients of the element's barycentric basis functions.
    pub fn grads(&self, e: usize) -> &[Vec3] {
        &self.grads[e][..self.dim + 1]
    }

    /// Barycentric quadrature points with weights scaled by the element measure.
    pub fn quadrature_bary(&self, e: usize, order: QuadratureOrder) -> Vec<([f64; 3], f64)> {
        let m = self.measures[e];
        if self.dim == 1 {
            let rule: &[(f64, f64)] = match order {
                QuadratureOrder::Standard => &GAUSS2,
                QuadratureOrder::High | QuadratureOrder::Refined => &GAUSS5,
            };
            if order == QuadratureOrder::Refined {
                return [0.0, 0.5]
                    .iter()
                    .flat_map(|&a| rule.iter().map(move |&(t, w)| ([1.0 - a - 0.5 * t, a + 0.5 * t, 0.0], 0.5 * w * m)))
                    .collect();
            }
            rule.iter().map(|&(t, w)| ([1.0 - t, t, 0.0], w * m)).collect()
        } else if order == QuadratureOrder::Refined {
            let rule = triangle_rule(order);
            let v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let mid = |i: usize, j: usize| [0, 1, 2].map(|k| 0.5 * (v[i][k] + v[j][k]));
            let subs = [
                [v[0], mid(0, 1), mid(0, 2)],
                [mid(0, 1), v[1], mid(1, 2)],
                [mid(0, 2), mid(1, 2), v[2]],
                [mid(1, 2), mid(0, 2), mid(0, 1)],
            ];
            subs.iter()
                .flat_map(|sub| {
                    rule.iter().map(move |(b, w)| {
                        ([0, 1, 2].map(|k| b[0] * sub[0][k] + b[1] * sub[1][k] + b[2] * sub[2][k]), 0.25 * w * m)
                    })
                })
                .collect()
        } else {
            triangle_rule(order).into_iter().map(|(b, w)| (b, w * m)).collect()
        }
    }

    /// Ambient quadrature points with weights.
    pub fn quadrature(&self, e: usize, order: QuadratureOrder) -> Vec<(Vec3, f64)> {
        self.quadrature_bary(e, order).into_iter().map(|(b, w)| (self.point_from_bary(e, b), w)).collect()
    }

    pub fn point_from_bary(&self, e: usize, bary: [f64; 3]) -> Vec3 {
        let mut p = linalg::ZERO3;
        for (k, &n) in self.element(e).iter().enumerate() {
            p = linalg::axpy(p, bary[k], self.points[n]);
        }
        p
    }

    pub fn local_from_bary(&self, e: usize, bary: [f64; 3]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for (k, &n) in self.element(e).iter().enumerate() {
            p[0] += bary[k] * self.local[n][0];
            p[1] += bary[k] * self.local[n][1];
        }
        p
    }

    /// Longest element edge.
    pub fn h_max(&self) -> f64 {
        self.edges().iter().map(|&[a, b]| linalg::dist(self.points[a], self.points[b])).fold(0.0, f64::max)
    }

    /// All distinct mesh edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut out: Vec<[usize; 2]> = Vec::new();
        for e in 0..self.n_elements() {
            let el = self.element(e);
            for a in 0..el.len() {
                for b in a + 1..el.len() {
                    out.push([el[a].min(el[b]), el[a].max(el[b])]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Boundary facets with their outward unit conormals (in the component).
    pub fn boundary_conormals(&self) -> Vec<([usize; 2], Vec3)> {
        if self.dim == 1 {
            return self
                .boundary_facets
                .iter()
                .map(|&[n, _]| {
                    let e = self.elements.iter().find(|el| el[0] == n || el[1] == n).copied().unwrap_or([0; 3]);
                    let other = if e[0] == n { e[1] } else { e[0] };
                    ([n, n], linalg::normalize(linalg::sub(self.points[n], self.points[other])))
                })
                .collect();
        }
        let mut owner: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for el in &self.elements {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                owner.insert((a.min(b), a.max(b)), el[(k + 2) % 3]);
            }
        }
        self.boundary_facets
            .iter()
            .map(|&[a, b]| {
                let c = owner[&(a, b)];
                let e = linalg::sub(self.points[b], self.points[a]);
                let v = linalg::sub(self.points[c], self.points[a]);
                let w = linalg::axpy(v, -linalg::dot(v, e) / linalg::dot(e, e), e);
                ([a, b], linalg::scale(linalg::normalize(w), -1.0))
            })
            .collect()
    }

    /// Element containing a local point, and the point's barycentric
    /// coordinates there.
    pub fn locate(&self, local: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-9;
        if self.dim == 1 {
            let x = local[0];
            // segment nodes are numbered in increasing order
            let n = self.local.len();
            if x < self.local[0][0] - TOL || x > self.local[n - 1][0] + TOL {
                return None;
            }
            let k = self.local.partition_point(|p| p[0] <= x).clamp(1, n - 1);
            let e = k - 1;
            let (a, b) = (self.local[e][0], self.local[e + 1][0]);
            let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
            return Some((e, [1.0 - t, t, 0.0]));
        }
        let bk = &self.buckets;
        let i = ((local[0] - bk.origin[0]) / bk.cell).floor();
        let j = ((local[1] - bk.origin[1]) / bk.cell).floor();
        if i < -1.0 || j < -1.0 || i > bk.nx as f64 || j > bk.ny as f64 {
            return None;
        }
        let i = (i.max(0.0) as usize).min(bk.nx - 1);
        let j = (j.max(0.0) as usize).min(bk.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &e in &bk.cells[j * bk.nx + i] {
            let b = self.bary2(e, local);
            let worst = b.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(_, _, w)| worst > *w) {
                best = Some((e, b, worst));
            }
        }
        match best {
            Some((e, b, w)) if w >= -TOL => {
                let c = b.map(|v| v.max(0.0));
                let s: f64 = c.iter().sum();
                Some((e, c.map(|v| v / s)))
            }
            _ => None,
        }
    }

    /// Value at a local point of the P1 function with nodal `values`.
    pub fn eval(&self, values: &[f64], local: [f64; 2]) -> Option<f64> {
        let (e, b) = self.locate(local)?;
        Some(self.element(e).iter().enumerate().map(|(k, &n)| b[k] * values[n]).sum())
    }

    fn bary2(&self, e: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.elements[e].map(|n| self.local[n]);
        let det = linalg::cross2(linalg::sub2(b, a), linalg::sub2(c, a));
        let l1 = linalg::cross2(linalg::sub2(p, a), linalg::sub2(c, a)) / det;
        let l2 = linalg::cross2(linalg::sub2(b, a), linalg::sub2(p, a)) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    fn build_buckets(&self) -> Buckets {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.local {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n_side = (self.n_elements() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n_side).max(1e-12);
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        let pad = 1e-9;
        for (e, el) in self.elements.iter().enumerate() {
            let pts = el.map(|n| self.local[n]);
            let x0 = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - pad;
            let x1 = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + pad;
            let y0 = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - pad;
            let y1 = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + pad;
            let ci = |v: f64, o: f64, n: usize| (((v - o) / cell).floor().max(0.0) as usize).min(n - 1);
            for j in ci(y0, lo[1], ny)..=ci(y1, lo[1], ny) {
                for i in ci(x0, lo[0], nx)..=ci(x1, lo[0], nx) {
                    cells[j * nx + i].push(e);
                }
            }
        }
        Buckets { origin: lo, cell, nx, ny, cells }
    }
}

/// Uniform nodes along each segment junction: ceil(L/h) pieces.
fn junction_points(j: &Junction, h: f64) -> Vec<Vec3> {
    match &j.geom {
        JunctionGeom::Point(p) => vec![*p],
        JunctionGeom::Segment(a, b) => {
            let n = pieces(linalg::dist(*a, *b), h);
            (0..=n).map(|k| linalg::axpy(*a, k as f64 / n as f64, linalg::sub(*b, *a))).collect()
        }
    }
}

fn pieces(len: f64, h: f64) -> usize {
    ((len / h - 1e-9).ceil() as usize).max(1)
}

/// Sorted breakpoints refined so that no gap exceeds `h`.
fn subdivide(mut breaks: Vec<f64>, h: f64) -> Vec<f64> {
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = pieces(w[1] - w[0], h);
        for k in 1..=n {
            out.push(if k == n { w[1] } else { w[0] + (w[1] - w[0]) * k as f64 / n as f64 });
        }
    }
    out
}

fn mesh_segment(comp: &Component, forced: &[[f64; 2]], h: f64) -> Mesh {
    let Shape::Interval([a, b]) = comp.shape else { unreachable!() };
    let mut breaks = vec![a, b];
    breaks.extend(forced.iter().map(|p| p[0]));
    let xs = subdivide(breaks, h);
    let local: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
    let elements = (0..xs.len() - 1).map(|k| [k, k + 1, usize::MAX]).collect();
    Mesh::new(1, local, comp, elements)
}

fn axis_rectangle(v: &[[f64; 2]]) -> Option<[[f64; 2]; 2]> {
    if v.len() != 4 {
        return None;
    }
    for k in 0..4 {
        let (p, q) = (v[k], v[(k + 1) % 4]);
        if p[0] != q[0] && p[1] != q[1] {
            return None;
        }
    }
    let xs = v.iter().map(|p| p[0]);
    let ys = v.iter().map(|p| p[1]);
    Some([
        [xs.clone().fold(f64::INFINITY, f64::min), ys.clone().fold(f64::INFINITY, f64::min)],
        [xs.fold(f64::NEG_INFINITY, f64::max), ys.fold(f64::NEG_INFINITY, f64::max)],
    ])
}

fn mesh_rectangle(comp: &Component, rect: [[f64; 2]; 2], forced: &[[f64; 2]], h: f64) -> Mesh {
    let [lo, hi] = rect;
    let xs = subdivide([lo[0], hi[0]].into_iter().chain(forced.iter().map(|p| p[0])).collect(), h);
    let ys = subdivide([lo[1], hi[1]].into_iter().chain(forced.iter().map(|p| p[1])).collect(), h);
    let nx = xs.len();
    let mut local = Vec::with_capacity(nx * ys.len());
    for &y in &ys {
        for &x in &xs {
            local.push([x, y]);
        }
    }
    let mut elements = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let n00 = j * nx + i;
            let (n10, n01, n11) = (n00 + 1, n00 + nx, n00 + nx + 1);
            // diagonals alternate between neighbouring cells (union-jack pattern)
            if (i + j) % 2 == 0 {
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            } else {
                elements.push([n00, n10, n01]);
                elements.push([n10, n11, n01]);
            }
        }
    }
    Mesh::new(2, local, comp, elements)
}

fn mesh_polygon(
    comp: &Component,
    poly: &[[f64; 2]],
    forced: &[[f64; 2]],
    constraints: &[[[f64; 2]; 2]],
    h: f64,
) -> Result<Mesh, GeometryError> {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let add = |pts: &mut Vec<[f64; 2]>, p: [f64; 2]| -> usize {
        if let Some(k) = pts.iter().position(|q| linalg::norm2(linalg::sub2(*q, p)) <= 1e-12) {
            k
        } else {
            pts.push(p);
            pts.len() - 1
        }
    };
    for (p, q) in super::polygon_edges(poly) {
        let n = pieces(linalg::norm2(linalg::sub2(q, p)), h);
        let mut prev = add(&mut pts, p);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let next = add(&mut pts, [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            edges.push([prev, next]);
            prev = next;
        }
    }
    for p in forced {
        add(&mut pts, *p);
    }
    for [p, q] in constraints {
        let a = add(&mut pts, *p);
        let b = add(&mut pts, *q);
        edges.push([a, b]);
    }
    let shape = Shape::Polygon(poly.to_vec());
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let nx = ((hi[0] - lo[0]) / h).floor() as usize;
    let ny = ((hi[1] - lo[1]) / h).floor() as usize;
    for j in 0..=ny {
        for i in 0..=nx {
            let p = [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
            let clear = super::point_in_polygon(poly, p)
                && shape.boundary_distance(p) >= 0.5 * h
                && forced.iter().all(|q| linalg::norm2(linalg::sub2(*q, p)) >= 0.5 * h)
                && constraints.iter().all(|[a, b]| linalg::point_segment_dist2(p, *a, *b) >= 0.5 * h);
            if clear {
                pts.push(p);
            }
        }
    }
    let vertices: Vec<Point2<f64>> = pts.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mut conflicts = 0usize;
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::try_bulk_load_cdt(vertices, edges, |_| conflicts += 1)
        .map_err(|e| GeometryError::MalformedShape(comp.id, format!("triangulation failed: {e:?}")))?;
    if conflicts > 0 || cdt.num_vertices() != pts.len() {
        return Err(GeometryError::MalformedShape(comp.id, "conflicting mesh constraints".into()));
    }
    let local: Vec<[f64; 2]> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let mut elements = Vec::new();
    for f in cdt.inner_faces() {
        let vs = f.vertices().map(|v| v.fix().index());
        let c = [
            (local[vs[0]][0] + local[vs[1]][0] + local[vs[2]][0]) / 3.0,
            (local[vs[0]][1] + local[vs[1]][1] + local[vs[2]][1]) / 3.0,
        ];
        if super::point_in_polygon(poly, c) {
            elements.push(vs);
        }
    }
    elements.sort_unstable();
    Ok(Mesh::new(2, local, comp, elements))
}

/// Meshes every component with spacing `h`, forcing junction nodes on
/// both sides, and pairs up the junction nodes.
pub fn build_meshes(
    components: &[Component],
    junctions: &[Junction],
    h: f64,
) -> Result<(Vec<Mesh>, Vec<JunctionNodes>), GeometryError> {
    let jpoints: Vec<Vec<Vec3>> = junctions.iter().map(|j| junction_points(j, h)).collect();
    let mut meshes = Vec::with_capacity(components.len());
    for (c, comp) in components.iter().enumerate() {
        let mut forced = Vec::new();
        let mut constraints = Vec::new();
        let mut axis_aligned = true;
        for (j, pts) in junctions.iter().zip(&jpoints) {
            if !j.involves(c) {
                continue;
            }
            let loc: Vec<[f64; 2]> = pts.iter().map(|p| comp.to_local(*p).0).collect();
            if loc.len() > 1 {
                let (a, b) = (loc[0], loc[loc.len() - 1]);
                if (a[0] - b[0]).abs() > 1e-12 && (a[1] - b[1]).abs() > 1e-12 {
                    axis_aligned = false;
                }
                constraints.extend(loc.windows(2).map(|w| [w[0], w[1]]));
            }
            forced.extend(loc);
        }
        let mesh = match &comp.shape {
            Shape::Interval(_) => mesh_segment(comp, &forced, h),
            Shape::Polygon(poly) => match axis_rectangle(poly) {
                Some(rect) if axis_aligned => mesh_rectangle(comp, rect, &forced, h),
                _ => mesh_polygon(comp, poly, &forced, &constraints, h)?,
            },
        };
        meshes.push(mesh);
    }
    let mut nodes = Vec::with_capacity(junctions.len());
    for j in junctions {
        let side = |c: usize| -> Vec<(f64, usize)> {
            let mesh = &meshes[c];
            let mut v: Vec<(f64, usize)> = (0..mesh.n_nodes())
                .filter(|&n| j.geom.distance(mesh.points[n]) <= INCIDENCE_TOL)
                .map(|n| (j.geom.param(mesh.points[n]), n))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        let (a, b) = (side(j.first), side(j.second));
        let fail = |msg: String| GeometryError::MeshConformityFailure(j.ids.0, j.ids.1, msg);
        if a.is_empty() || a.len() != b.len() {
            return Err(fail(format!("{} nodes on one side, {} on the other", a.len(), b.len())));
        }
        let mut pairs = Vec::with_capacity(a.len());
        let mut params = Vec::with_capacity(a.len());
        for (&(t, na), &(_, nb)) in a.iter().zip(&b) {
            let d = linalg::dist(meshes[j.first].points[na], meshes[j.second].points[nb]);
            if d > INCIDENCE_TOL {
                return Err(fail(format!("nodes differ by {d:e}")));
            }
            pairs.push((na, nb));
            params.push(t);
        }
        nodes.push(JunctionNodes { pairs, params });
    }
    Ok((meshes, nodes))
}
