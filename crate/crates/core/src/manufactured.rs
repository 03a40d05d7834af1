//! Manufactured solutions: the forcing on each component is derived
//! symbolically as f_i = −div_{S_i}(θ B_μ ∇_{S_i}u)/θ, and the conormal flux
//! θ B_μ ∇_{S_i}u is applied as Neumann data on component boundaries.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::build::{div, mul, neg, sub, sum};
use crate::exprlang::{Expr, ExprError, Var};
use crate::funcspace::{FunctionSpace, MuFunction, QuadratureOrder};
use crate::geometry::{JunctionGeom, Structure, TangentFrame};
use crate::linalg::{self, Mat3, Vec3};
use crate::relaxation::{self, MatrixField, RelaxationError};
use crate::solver::{self, KernelGroups, Load, SolveOptions, SolveReport};

/// Tolerance for junction continuity of the exact solution.
pub const CONTINUITY_TOL: f64 = 1e-10;
/// Errors below this are reported as exact.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManufacturedError {
    #[error("exact solution jumps by {jump:e} across the junction of components {a} and {b} at {at:?}")]
    Discontinuous { a: u32, b: u32, at: Vec3, jump: f64 },
    #[error("manufactured forcing unsupported: {0}")]
    Unsupported(String),
    #[error("expected {expected} exact-solution expressions, got {got}")]
    ComponentCount { got: usize, expected: usize },
    #[error("evaluation of the exact solution: {0}")]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
}

/// Exact solution with its derived data.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub exact: Vec<Expr>,
    /// Tangential gradient ∇_{S_i}u per component.
    pub gradients: Vec<[Expr; 3]>,
    pub load: Load,
}

/// Symbolic B_μ on a component. Constant fields are relaxed numerically;
/// variable fields must be positive definite, in which case
/// B_μ = B − BN(NᵀBN)⁻¹NᵀB with N an orthonormal basis of the normal space.
fn relaxed_symbolic(field: &MatrixField, structure: &Structure, c: usize) -> Result<[[Expr; 3]; 3], ManufacturedError> {
    let comp = &structure.components[c];
    let frame = TangentFrame::from_vectors(comp.origin, &comp.tangents);
    if field.is_constant() {
        let b = field.eval(comp.origin)?;
        let (bmu, _, _) = relaxation::relax_matrix(&b, &frame)?;
        return Ok(bmu.map(|row| row.map(Expr::num)));
    }
    for p in &structure.meshes[c].points {
        let b = field.eval(*p)?;
        let ok = relaxation::admissibility_check(
            &b,
            &TangentFrame::from_vectors(*p, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        );
        if ok.is_err() {
            return Err(ManufacturedError::Unsupported(
                "variable coefficients must be positive definite in manufactured mode".into(),
            ));
        }
    }
    let normals = {
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let projected: Vec<Vec3> = axes.iter().map(|a| linalg::mat_vec(&frame.normal_projector, *a)).collect();
        linalg::span_projector(&projected, 1e-8).0
    };
    let b = |r: usize, s: usize| field.entry(r, s).clone();
    // (BN)_{r a}
    let bn: Vec<[Expr; 3]> =
        normals.iter().map(|n| [0, 1, 2].map(|r| sum((0..3).map(|s| mul(b(r, s), Expr::num(n[s])))))).collect();
    // C = NᵀBN
    let k = normals.len();
    let cm: Vec<Vec<Expr>> = (0..k)
        .map(|a| (0..k).map(|bb| sum((0..3).map(|r| mul(Expr::num(normals[a][r]), bn[bb][r].clone())))).collect())
        .collect();
    let cinv: Vec<Vec<Expr>> = match k {
        0 => Vec::new(),
        1 => vec![vec![div(Expr::num(1.0), cm[0][0].clone())]],
        2 => {
            let det = sub(mul(cm[0][0].clone(), cm[1][1].clone()), mul(cm[0][1].clone(), cm[1][0].clone()));
            vec![
                vec![div(cm[1][1].clone(), det.clone()), div(neg(cm[0][1].clone()), det.clone())],
                vec![div(neg(cm[1][0].clone()), det.clone()), div(cm[0][0].clone(), det)],
            ]
        }
        _ => return Err(ManufacturedError::Unsupported("component without tangent directions".into())),
    };
    Ok([0, 1, 2].map(|r| {
        [0, 1, 2].map(|s| {
            let mut correction = Vec::new();
            for a in 0..k {
                for bb in 0..k {
                    correction.push(mul(mul(bn[a][r].clone(), cinv[a][bb].clone()), bn[bb][s].clone()));
                }
            }
            sub(b(r, s), sum(correction))
        })
    }))
}

fn project(p: &Mat3, v: &[Expr; 3]) -> [Expr; 3] {
    [0, 1, 2].map(|r| sum((0..3).map(|s| mul(Expr::num(p[r][s]), v[s].clone()))))
}

fn gradient(u: &Expr) -> [Expr; 3] {
    Var::ALL.map(|v| u.differentiate(v))
}

/// Derives forcing and boundary flux for an exact solution given per
/// component, after checking continuity across coupled junctions.
pub fn manufacture(
    structure: &Structure,
    field: &MatrixField,
    exact: &[Expr],
) -> Result<Manufactured, ManufacturedError> {
    let nc = structure.components.len();
    if exact.len() != nc {
        return Err(ManufacturedError::ComponentCount { got: exact.len(), expected: nc });
    }
    check_continuity(structure, exact)?;
    let mut gradients = Vec::with_capacity(nc);
    let mut f = Vec::with_capacity(nc);
    let mut flux = Vec::with_capacity(nc);
    for (c, u) in exact.iter().enumerate() {
        let comp = &structure.components[c];
        let p = comp.projector;
        let g = project(&p, &gradient(u));
        let bmu = relaxed_symbolic(field, structure, c)?;
        let theta = comp.density.clone();
        let q: [Expr; 3] =
            [0, 1, 2].map(|r| mul(theta.clone(), sum((0..3).map(|s| mul(bmu[r][s].clone(), g[s].clone())))));
        // tangential divergence Σ_rs P_rs ∂_s q_r
        let mut terms = Vec::new();
        for r in 0..3 {
            for s in 0..3 {
                if p[r][s] != 0.0 {
                    terms.push(mul(Expr::num(p[r][s]), q[r].differentiate(Var::from_index(s))));
                }
            }
        }
        f.push(neg(div(sum(terms), theta)));
        gradients.push(g);
        flux.push(q);
    }
    Ok(Manufactured { exact: exact.to_vec(), gradients, load: Load { f, flux: Some(flux) } })
}

fn check_continuity(structure: &Structure, exact: &[Expr]) -> Result<(), ManufacturedError> {
    for j in structure.junctions.iter().filter(|j| j.coupled) {
        let samples: Vec<Vec3> = match j.geom {
            JunctionGeom::Point(p) => vec![p],
            JunctionGeom::Segment(a, b) => {
                (0..=10).map(|k| linalg::axpy(a, k as f64 / 10.0, linalg::sub(b, a))).collect()
            }
        };
        for p in samples {
            let ua = exact[j.first].eval_at(p)?;
            let ub = exact[j.second].eval_at(p)?;
            let jump = (ua - ub).abs();
            if jump > CONTINUITY_TOL * ua.abs().max(1.0) {
                return Err(ManufacturedError::Discontinuous { a: j.ids.0, b: j.ids.1, at: p, jump });
            }
        }
    }
    Ok(())
}

/// Errors of a discrete solution against the exact one, shifted to zero
/// group means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub exact: bool,
}

pub fn error_norms(u: &MuFunction, m: &Manufactured) -> Result<ErrorNorms, ManufacturedError> {
    let space = &u.space;
    let st = &space.structure;
    let groups = KernelGroups::new(space);
    let order = QuadratureOrder::High;
    let mut eval_err = None;
    let mut ev = |e: &Expr, p: Vec3| match e.eval_at(p) {
        Ok(v) => v,
        Err(err) => {
            eval_err.get_or_insert(err);
            f64::NAN
        }
    };
    let mut means = Vec::with_capacity(groups.len());
    for members in &groups.members {
        let mut num = 0.0;
        let mut den = 0.0;
        for &c in members {
            num += space.integrate(c, order, |_, _, p| ev(&m.exact[c], p));
            den += space.integrate(c, order, |_, _, _| 1.0);
        }
        means.push(num / den);
    }
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for c in 0..st.components.len() {
        let mesh = &st.meshes[c];
        let vals = u.component_values(c);
        let shift = means[groups.group_of(c)];
        l2 += space.integrate(c, order, |e, b, p| {
            let uh: f64 = mesh.element(e).iter().enumerate().map(|(k, &n)| b[k] * vals[n]).sum();
            (uh - (ev(&m.exact[c], p) - shift)).powi(2)
        });
        semi += space.integrate(c, order, |e, _, p| {
            let gh = u.element_gradient(c, e);
            let ge = [ev(&m.gradients[c][0], p), ev(&m.gradients[c][1], p), ev(&m.gradients[c][2], p)];
            linalg::dot(linalg::sub(gh, ge), linalg::sub(gh, ge))
        });
    }
    if let Some(err) = eval_err {
        return Err(err.into());
    }
    let l2 = l2.sqrt();
    let h1 = (l2 * l2 + semi).sqrt();
    Ok(ErrorNorms { l2, h1, exact: l2 < EXACT_TOL && h1 < EXACT_TOL })
}

/// One manufactured solve on a built structure.
#[derive(Debug, Clone)]
pub struct ManufacturedRun {
    pub solution: MuFunction,
    pub report: SolveReport,
    pub errors: ErrorNorms,
    pub data: Manufactured,
}

pub fn solve_manufactured(
    structure: &Arc<Structure>,
    field: &MatrixField,
    exact: &[Expr],
    opts: &SolveOptions,
) -> crate::Result<ManufacturedRun> {
    let data = manufacture(structure, field, exact)?;
    let space = FunctionSpace::new(structure.clone());
    let relaxed = relaxation::relax(field, structure)?;
    let sys = solver::assemble(&space, &relaxed, &data.load, None)?;
    sys.compatibility_check(opts.compat_tol)?;
    let (solution, report) = solver::solve_neumann(&sys, opts, None)?;
    let errors = error_norms(&solution, &data)?;
    Ok(ManufacturedRun { solution, report, errors, data })
}
