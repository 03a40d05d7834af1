use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::exprlang::build::{mul, sum};
use crate::exprlang::{Expr, Var};
use crate::funcspace::{MuFunction, QuadratureOrder};
use crate::geometry::{JunctionGeom, Structure};
use crate::linalg::{self, Vec3};

/// Largest max/min ratio of the scanned quotient norms that passes.
pub const DQ_RATIO_BOUND: f64 = 1.25;

const ALIGN_TOL: f64 = 1e-12;

/// Direction, step and interior band of a generalized translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationSpec {
    pub axis: Vec3,
    pub h: f64,
    pub margin: f64,
}

impl TranslationSpec {
    /// Translation along the ambient coordinate axis `k` (0 = x).
    pub fn along(k: usize, h: f64, margin: f64) -> Self {
        let mut axis = [0.0; 3];
        axis[k] = 1.0;
        TranslationSpec { axis, h, margin }
    }
}

/// A translated (or quotient) function with the per-component mask of
/// nodes where the translation was actually applied.
#[derive(Debug, Clone)]
pub struct Translated {
    pub function: MuFunction,
    pub active: Vec<Vec<bool>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    /// Axis tangent to the component: plain shift.
    Shift,
    /// Axis normal to the component: shifted trace of the other component.
    Transfer,
}

fn nearest_on(geom: &JunctionGeom, q: Vec3) -> Vec3 {
    match *geom {
        JunctionGeom::Point(p) => p,
        JunctionGeom::Segment(a, b) => {
            let ab = linalg::sub(b, a);
            let t = (linalg::dot(linalg::sub(q, a), ab) / linalg::dot(ab, ab)).clamp(0.0, 1.0);
            linalg::axpy(a, t, ab)
        }
    }
}

/// u^{h,d}: on a component containing the direction d, u(· + hd); on a
/// component normal to d, u plus the difference of the shifted and unshifted
/// traces of the other component, extended constantly off Σ. Nodes closer
/// than `margin` to the boundary are left unchanged and marked inactive.
pub fn generalized_translate(u: &MuFunction, spec: &TranslationSpec) -> Result<Translated, VerifyError> {
    if spec.h.abs() > spec.margin || !spec.h.is_finite() {
        return Err(VerifyError::MarginViolation { h: spec.h, margin: spec.margin });
    }
    let st = &u.space.structure;
    if st.components.len() != 2 || st.junctions.len() != 1 || !st.junctions[0].coupled {
        return Err(VerifyError::UnsupportedGeometry(
            "expected two components of equal dimension sharing one junction".into(),
        ));
    }
    let len = linalg::norm(spec.axis);
    if !(len > 0.0) {
        return Err(VerifyError::UnsupportedGeometry("zero translation axis".into()));
    }
    let d = linalg::scale(spec.axis, 1.0 / len);
    let mut modes = [Mode::Shift; 2];
    for (c, comp) in st.components.iter().enumerate() {
        let pd = linalg::mat_vec(&comp.projector, d);
        modes[c] = if linalg::dist(pd, d) < ALIGN_TOL {
            Mode::Shift
        } else if linalg::norm(pd) < ALIGN_TOL {
            Mode::Transfer
        } else {
            return Err(VerifyError::UnsupportedGeometry(format!(
                "axis {:?} is neither tangent nor normal to component {}",
                spec.axis, comp.id
            )));
        };
    }
    if modes == [Mode::Transfer; 2] {
        return Err(VerifyError::UnsupportedGeometry("axis is normal to both components".into()));
    }
    let geom = &st.junctions[0].geom;
    let mut values = u.values.clone();
    let mut active = Vec::with_capacity(2);
    for (c, comp) in st.components.iter().enumerate() {
        let mesh = &st.meshes[c];
        let mut mask = vec![false; mesh.n_nodes()];
        for n in 0..mesh.n_nodes() {
            if comp.boundary_distance(mesh.local[n]) < spec.margin - ALIGN_TOL {
                continue;
            }
            let q = mesh.points[n];
            let shifted = match modes[c] {
                Mode::Shift => u.eval_on(c, linalg::axpy(q, spec.h, d)),
                Mode::Transfer => {
                    let o = 1 - c;
                    let base = nearest_on(geom, q);
                    match (u.eval_on(o, linalg::axpy(base, spec.h, d)), u.eval_on(o, base)) {
                        (Some(a), Some(b)) => Some(u.node_value(c, n) + a - b),
                        _ => None,
                    }
                }
            };
            if let Some(v) = shifted {
                values[u.space.dofmap.node_dof[c][n]] = v;
                mask[n] = true;
            }
        }
        active.push(mask);
    }
    Ok(Translated { function: MuFunction { space: u.space.clone(), values }, active })
}

/// D^{h,d}u = (u^{h,d} − u)/h, zero on inactive nodes.
pub fn difference_quotient(u: &MuFunction, spec: &TranslationSpec) -> Result<Translated, VerifyError> {
    if spec.h == 0.0 {
        return Err(VerifyError::ZeroStep);
    }
    let t = generalized_translate(u, spec)?;
    let function = t.function.lin_comb(1.0 / spec.h, u, -1.0 / spec.h);
    Ok(Translated { function, active: t.active })
}

/// Squared μ-norms of v and ∇_μv over elements whose nodes are all active.
fn active_norms(t: &Translated) -> (f64, f64) {
    let v = &t.function;
    let st = &v.space.structure;
    let mut l2 = 0.0;
    let mut grad = 0.0;
    for c in 0..st.components.len() {
        let mesh = &st.meshes[c];
        let vals = v.component_values(c);
        let mask = &t.active[c];
        l2 += v.space.integrate(c, QuadratureOrder::Standard, |e, b, _| {
            let el = mesh.element(e);
            if el.iter().all(|&n| mask[n]) {
                el.iter().enumerate().map(|(k, &n)| b[k] * vals[n]).sum::<f64>().powi(2)
            } else {
                0.0
            }
        });
        grad += v.space.integrate(c, QuadratureOrder::Standard, |e, _, _| {
            if mesh.element(e).iter().all(|&n| mask[n]) {
                let g = v.element_gradient(c, e);
                linalg::dot(g, g)
            } else {
                0.0
            }
        });
    }
    (l2, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DqRow {
    pub h: f64,
    pub dq_norm: f64,
    pub grad_dq_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DqScan {
    pub axis: Vec3,
    pub margin: f64,
    pub rows: Vec<DqRow>,
    /// max/min of ‖∇_μ D^h u‖ over the scan.
    pub ratio: f64,
    pub pass: bool,
}

/// ‖D^h u‖ and ‖∇_μ D^h u‖ on the fixed window of nodes at distance at
/// least `margin` from the boundary, for each step in `hs`.
pub fn dq_uniform_bound_scan(u: &MuFunction, axis: Vec3, hs: &[f64], margin: f64) -> Result<DqScan, VerifyError> {
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let t = difference_quotient(u, &TranslationSpec { axis, h, margin })?;
        let (l2, grad) = active_norms(&t);
        rows.push(DqRow { h, dq_norm: l2.sqrt(), grad_dq_norm: grad.sqrt() });
    }
    let max = rows.iter().map(|r| r.grad_dq_norm).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.grad_dq_norm).fold(f64::INFINITY, f64::min);
    // gradients at rounding level relative to the quotients count as zero
    let scale = rows.iter().map(|r| r.dq_norm).fold(1.0, f64::max);
    let ratio = if max <= 1e-10 * scale { 1.0 } else { max / min };
    let pass = !rows.is_empty() && ratio.is_finite() && ratio <= DQ_RATIO_BOUND;
    Ok(DqScan { axis, margin, rows, ratio, pass })
}

/// ‖∇_μ ∂_d u‖ for an exact solution, over the elements of the window used
/// by [`dq_uniform_bound_scan`]. On a component normal to d the limit is
/// the Σ-trace of ∂_d u of the other component, extended constantly.
pub fn dq_oracle(st: &Structure, exact: &[Expr], axis: Vec3, margin: f64) -> Result<f64, VerifyError> {
    let d = linalg::normalize(axis);
    let geom = &st.junctions[0].geom;
    let tau = match *geom {
        JunctionGeom::Segment(a, b) => Some(linalg::normalize(linalg::sub(b, a))),
        JunctionGeom::Point(_) => None,
    };
    let derivative =
        |e: &Expr| -> Expr { sum((0..3).map(|k| mul(Expr::num(d[k]), e.differentiate(Var::from_index(k))))) };
    let mut total = 0.0;
    for (c, comp) in st.components.iter().enumerate() {
        let mesh = &st.meshes[c];
        let shift = linalg::dist(linalg::mat_vec(&comp.projector, d), d) < ALIGN_TOL;
        let source = if shift { &exact[c] } else { &exact[1 - c] };
        let dd = derivative(source);
        let grad: [Expr; 3] = Var::ALL.map(|v| dd.differentiate(v));
        let active: Vec<bool> = mesh.local.iter().map(|l| comp.boundary_distance(*l) >= margin - ALIGN_TOL).collect();
        let theta = &comp.density;
        let mut err = None;
        for e in 0..mesh.n_elements() {
            if !mesh.element(e).iter().all(|&n| active[n]) {
                continue;
            }
            for (p, w) in mesh.quadrature(e, QuadratureOrder::High) {
                let at = if shift { p } else { nearest_on(geom, p) };
                let g = match grad.iter().map(|g| g.eval_at(at)).collect::<Result<Vec<f64>, _>>() {
                    Ok(g) => [g[0], g[1], g[2]],
                    Err(x) => {
                        err.get_or_insert(x);
                        continue;
                    }
                };
                let v = if shift {
                    linalg::mat_vec(&comp.projector, g)
                } else {
                    match tau {
                        Some(t) => linalg::scale(t, linalg::dot(t, g)),
                        None => linalg::ZERO3,
                    }
                };
                total += w * theta.eval_at(p)? * linalg::dot(v, v);
            }
        }
        if let Some(x) = err {
            return Err(x.into());
        }
    }
    Ok(total.sqrt())
}
