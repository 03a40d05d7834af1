use serde::Serialize;

use super::VerifyError;
use crate::exprlang::{Expr, Var};
use crate::funcspace::MuFunction;
use crate::geometry::{Component, Structure};
use crate::linalg;

const WINDOW_TOL: f64 = 1e-9;

/// Second-difference norms of u on the interior window of one component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Indicator {
    pub component: u32,
    pub margin: f64,
    pub step: f64,
    pub n_probes: usize,
    /// `(label, norm)` with labels "11", "22", "12", "21" in the
    /// component's tangent directions.
    pub entries: Vec<(String, f64)>,
    pub hessian_norm: f64,
    /// ‖Δ²₁₂u − Δ²₂₁u‖ over the probes.
    pub symmetry_residual: f64,
}

/// Lattice points (spacing `step`, anchored at the shape's lower-left
/// bounding corner) at distance ≥ margin from the boundary.
fn probe_points(comp: &Component, margin: f64, step: f64) -> Vec<[f64; 2]> {
    let vertices = comp.shape.vertices();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in &vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let count = |k: usize| ((hi[k] - lo[k]) / step + WINDOW_TOL).floor() as usize;
    let ny = if comp.dim == 1 { 0 } else { count(1) };
    let mut out = Vec::new();
    for j in 0..=ny {
        for i in 0..=count(0) {
            let p = [lo[0] + i as f64 * step, lo[1] + j as f64 * step];
            if comp.shape.contains(p, 0.0) && comp.boundary_distance(p) >= margin - WINDOW_TOL {
                out.push(p);
            }
        }
    }
    out
}

fn component_of(st: &Structure, id: u32) -> Result<usize, VerifyError> {
    st.component_index(id).ok_or(VerifyError::UnknownComponent(id))
}

/// Central second differences with step `step` on the probe lattice of the
/// window {dist(·, ∂S) ≥ margin}; norms are lattice sums scaled by step^dim.
pub fn h2_indicator(u: &MuFunction, component: u32, margin: f64, step: f64) -> Result<H2Indicator, VerifyError> {
    let st = &u.space.structure;
    let c = component_of(st, component)?;
    let comp = &st.components[c];
    let reach = if comp.dim == 2 { step * 2f64.sqrt() } else { step };
    if !(step > 0.0) || reach > margin + WINDOW_TOL {
        return Err(VerifyError::MarginViolation { h: reach, margin });
    }
    let probes = probe_points(comp, margin, step);
    if probes.is_empty() {
        return Err(VerifyError::EmptyWindow { component, margin });
    }
    let at = |p: [f64; 2], a: f64, b: f64| -> f64 {
        u.eval_local(c, [p[0] + a * step, p[1] + b * step]).expect("stencil lies inside the window")
    };
    let s2 = step * step;
    let weight = step.powi(comp.dim as i32);
    let mut sums = [0.0; 4];
    let mut sym = 0.0;
    for &p in &probes {
        let centre = at(p, 0.0, 0.0);
        let d11 = (at(p, 1.0, 0.0) - 2.0 * centre + at(p, -1.0, 0.0)) / s2;
        sums[0] += d11 * d11;
        if comp.dim == 2 {
            let d22 = (at(p, 0.0, 1.0) - 2.0 * centre + at(p, 0.0, -1.0)) / s2;
            let (a, b, cc, d) = (at(p, 1.0, 1.0), at(p, 1.0, -1.0), at(p, -1.0, 1.0), at(p, -1.0, -1.0));
            let d12 = ((a + d) - (b + cc)) / (4.0 * s2);
            // the same corners visited with the roles of the axes exchanged
            let d21 = ((a + d) - (cc + b)) / (4.0 * s2);
            sums[1] += d22 * d22;
            sums[2] += d12 * d12;
            sums[3] += d21 * d21;
            sym += (d12 - d21).powi(2);
        }
    }
    let labels: &[&str] = if comp.dim == 2 { &["11", "22", "12", "21"] } else { &["11"] };
    let entries = labels.iter().zip(sums).map(|(l, s)| (l.to_string(), (s * weight).sqrt())).collect();
    Ok(H2Indicator {
        component,
        margin,
        step,
        n_probes: probes.len(),
        entries,
        hessian_norm: (sums.iter().sum::<f64>() * weight).sqrt(),
        symmetry_residual: (sym * weight).sqrt(),
    })
}

/// Lattice L² norm of the tangential Hessian of an exact solution on the
/// same probe points as [`h2_indicator`].
pub fn h2_oracle(st: &Structure, component: u32, exact: &Expr, margin: f64, step: f64) -> Result<f64, VerifyError> {
    let c = component_of(st, component)?;
    let comp = &st.components[c];
    let hess: Vec<Vec<Expr>> =
        Var::ALL.iter().map(|&a| Var::ALL.iter().map(|&b| exact.differentiate(a).differentiate(b)).collect()).collect();
    let mut sum = 0.0;
    for p in probe_points(comp, margin, step) {
        let x = comp.to_ambient(p);
        let mut h = [[0.0; 3]; 3];
        for r in 0..3 {
            for s in 0..3 {
                h[r][s] = hess[r][s].eval_at(x)?;
            }
        }
        for ta in &comp.tangents {
            for tb in &comp.tangents {
                sum += linalg::dot(*ta, linalg::mat_vec(&h, *tb)).powi(2);
            }
        }
    }
    Ok((sum * step.powi(comp.dim as i32)).sqrt())
}
