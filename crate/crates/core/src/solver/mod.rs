//! Weak Neumann problem ∫ θ B_μ∇_μu·∇_μφ = ∫ θ fφ (+ boundary flux) on a
//! structure, solved by projected conjugate gradients.

mod csr;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{Expr, ExprError};
use crate::funcspace::{Coupling, FunctionSpace, MuFunction, QuadratureOrder};
use crate::geometry::mesh::GAUSS5;
use crate::geometry::{JunctionGeom, Structure};
use crate::linalg::{self, Vec3};
use crate::relaxation::{self, MatrixField, RelaxationError, RelaxedField};

pub use csr::{dot, norm, Csr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("right-hand side is incompatible on groups {groups:?} (residuals {residuals:?}, tolerance {tol:e})")]
    IncompatibleRhs { groups: Vec<usize>, residuals: Vec<f64>, tol: f64 },
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("inverse power iteration failed for group {group}: {reason}")]
    EigenFailure { group: usize, reason: String },
    #[error("evaluation of the load on component {component}: {source}")]
    Eval { component: u32, source: ExprError },
    #[error("expected {expected} per-component expressions, got {got}")]
    ComponentCount { got: usize, expected: usize },
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
}

/// Components connected through coupled junctions: the kernel of ∇_μ is
/// spanned by the characteristic functions of these groups.
pub fn kernel_groups(structure: &Structure) -> Vec<Vec<usize>> {
    let n = structure.components.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in structure.junctions.iter().filter(|j| j.coupled) {
        let (a, b) = (find(&mut parent, j.first), find(&mut parent, j.second));
        parent[a.max(b)] = a.min(b);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for c in 0..n {
        let r = find(&mut parent, c);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(c);
    }
    groups
}

/// Kernel groups with their characteristic vectors on a function space.
#[derive(Debug, Clone, Serialize)]
pub struct KernelGroups {
    /// Component indices of each group.
    pub members: Vec<Vec<usize>>,
    pub ids: Vec<Vec<u32>>,
    /// μ(∪_{i∈I_k} S_i).
    pub measures: Vec<f64>,
    #[serde(skip)]
    pub chi: Vec<Vec<f64>>,
}

impl KernelGroups {
    pub fn new(space: &FunctionSpace) -> Self {
        let st = &space.structure;
        let members = kernel_groups(st);
        let ids = members.iter().map(|g| g.iter().map(|&c| st.components[c].id).collect()).collect();
        let measures = members.iter().map(|g| g.iter().map(|&c| space.component_measure(c)).sum()).collect();
        let chi = members
            .iter()
            .map(|g| {
                let mut v = vec![0.0; space.n_dofs()];
                for &c in g {
                    for &d in &space.dofmap.node_dof[c] {
                        v[d] = 1.0;
                    }
                }
                v
            })
            .collect();
        KernelGroups { members, ids, measures, chi }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn group_of(&self, component: usize) -> usize {
        self.members.iter().position(|g| g.contains(&component)).unwrap_or(0)
    }
}

/// Right-hand side: a volume source per component and, optionally, a
/// conormal flux field q per component whose normal part q·ν is applied
/// on the component boundary.
#[derive(Debug, Clone)]
pub struct Load {
    pub f: Vec<Expr>,
    pub flux: Option<Vec<[Expr; 3]>>,
}

impl Load {
    pub fn uniform(f: Expr, n_components: usize) -> Self {
        Load { f: vec![f; n_components], flux: None }
    }

    pub fn per_component(f: Vec<Expr>) -> Self {
        Load { f, flux: None }
    }
}

/// Assembled stiffness, mass and load.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub space: Arc<FunctionSpace>,
    pub a: Csr,
    pub m: Csr,
    pub f: Vec<f64>,
    pub groups: KernelGroups,
    /// `M χ_k` for each group.
    pub mass_weights: Vec<Vec<f64>>,
    /// Per group, max |f| over quadrature samples (and |q·ν| on the boundary).
    pub load_scale: Vec<f64>,
    pub lambda: f64,
}

fn eval_on(e: &Expr, p: Vec3, component: u32) -> Result<f64, SolverError> {
    e.eval_at(p).map_err(|source| SolverError::Eval { component, source })
}

/// Assembles the system; `penalty` adds η∫_Σ (u₁ − u₂)(φ₁ − φ₂) on every
/// coupled junction (meaningful on a broken space).
pub fn assemble(
    space: &Arc<FunctionSpace>,
    relaxed: &RelaxedField,
    load: &Load,
    penalty: Option<f64>,
) -> Result<LinearSystem, SolverError> {
    let st = &space.structure;
    let nc = st.components.len();
    if load.f.len() != nc {
        return Err(SolverError::ComponentCount { got: load.f.len(), expected: nc });
    }
    let groups = KernelGroups::new(space);
    let n = space.n_dofs();
    let mut a_trip = Vec::new();
    let mut m_trip = Vec::new();
    let mut f = vec![0.0; n];
    let mut comp_scale = vec![0.0f64; nc];
    for (c, mesh) in st.meshes.iter().enumerate() {
        let id = st.components[c].id;
        let dofs = &space.dofmap.node_dof[c];
        for e in 0..mesh.n_elements() {
            let el = mesh.element(e);
            let grads = mesh.grads(e);
            for (q, (bary, w)) in mesh.quadrature_bary(e, QuadratureOrder::Standard).into_iter().enumerate() {
                let p = mesh.point_from_bary(e, bary);
                let wt = w * space.theta(c, p);
                let bmu = relaxed.at(c, e, q);
                for (i, &ni) in el.iter().enumerate() {
                    let bg = linalg::mat_vec(bmu, grads[i]);
                    for (k, &nk) in el.iter().enumerate() {
                        a_trip.push((dofs[ni], dofs[nk], wt * linalg::dot(bg, grads[k])));
                        m_trip.push((dofs[ni], dofs[nk], wt * bary[i] * bary[k]));
                    }
                }
            }
        }
        for e in 0..mesh.n_elements() {
            let el = mesh.element(e);
            for (bary, w) in mesh.quadrature_bary(e, QuadratureOrder::Refined) {
                let p = mesh.point_from_bary(e, bary);
                let fv = eval_on(&load.f[c], p, id)?;
                comp_scale[c] = comp_scale[c].max(fv.abs());
                let wt = w * space.theta(c, p) * fv;
                for (i, &ni) in el.iter().enumerate() {
                    f[dofs[ni]] += wt * bary[i];
                }
            }
        }
        if let Some(flux) = &load.flux {
            let q = &flux[c];
            for ([na, nb], nu) in mesh.boundary_conormals() {
                let qn = |p: Vec3| -> Result<f64, SolverError> {
                    let v = [eval_on(&q[0], p, id)?, eval_on(&q[1], p, id)?, eval_on(&q[2], p, id)?];
                    Ok(linalg::dot(v, nu))
                };
                if na == nb {
                    let g = qn(mesh.points[na])?;
                    comp_scale[c] = comp_scale[c].max(g.abs());
                    f[dofs[na]] += g;
                } else {
                    let (pa, pb) = (mesh.points[na], mesh.points[nb]);
                    let len = linalg::dist(pa, pb);
                    for (t, w) in GAUSS5.iter().flat_map(|&(t, w)| [(0.5 * t, 0.5 * w), (0.5 + 0.5 * t, 0.5 * w)]) {
                        let p = linalg::axpy(pa, t, linalg::sub(pb, pa));
                        let g = qn(p)?;
                        comp_scale[c] = comp_scale[c].max(g.abs());
                        f[dofs[na]] += w * len * g * (1.0 - t);
                        f[dofs[nb]] += w * len * g * t;
                    }
                }
            }
        }
    }
    if let Some(eta) = penalty {
        for (j, nodes) in st.junctions.iter().zip(&st.junction_nodes) {
            if !j.coupled {
                continue;
            }
            let d1: Vec<usize> = nodes.pairs.iter().map(|&(a, _)| space.dofmap.node_dof[j.first][a]).collect();
            let d2: Vec<usize> = nodes.pairs.iter().map(|&(_, b)| space.dofmap.node_dof[j.second][b]).collect();
            // gap variable g_k = u(d1_k) − u(d2_k)
            let mut add_gap = |k: usize, l: usize, w: f64| {
                for (s, dk) in [(1.0, d1[k]), (-1.0, d2[k])] {
                    for (t, dl) in [(1.0, d1[l]), (-1.0, d2[l])] {
                        a_trip.push((dk, dl, eta * w * s * t));
                    }
                }
            };
            match j.geom {
                JunctionGeom::Point(_) => add_gap(0, 0, 1.0),
                JunctionGeom::Segment(..) => {
                    for k in 0..nodes.pairs.len() - 1 {
                        let len = nodes.params[k + 1] - nodes.params[k];
                        add_gap(k, k, len / 3.0);
                        add_gap(k + 1, k + 1, len / 3.0);
                        add_gap(k, k + 1, len / 6.0);
                        add_gap(k + 1, k, len / 6.0);
                    }
                }
            }
        }
    }
    let a = Csr::from_triplets(n, a_trip);
    let m = Csr::from_triplets(n, m_trip);
    let mass_weights = groups.chi.iter().map(|chi| m.matvec(chi)).collect();
    let load_scale = groups.members.iter().map(|g| g.iter().map(|&c| comp_scale[c]).fold(0.0, f64::max)).collect();
    Ok(LinearSystem { space: space.clone(), a, m, f, groups, mass_weights, load_scale, lambda: relaxed.lambda })
}

impl LinearSystem {
    /// Removes the component of a dual vector along each m_k: afterwards
    /// χ_k·v = 0.
    pub fn project_dual(&self, v: &mut [f64]) {
        for (k, chi) in self.groups.chi.iter().enumerate() {
            let s = dot(chi, v) / self.groups.measures[k];
            for (x, m) in v.iter_mut().zip(&self.mass_weights[k]) {
                *x -= s * m;
            }
        }
    }

    /// Removes the μ-mean of a primal vector on each group: afterwards
    /// m_k·v = 0.
    pub fn project_primal(&self, v: &mut [f64]) {
        for (k, chi) in self.groups.chi.iter().enumerate() {
            let s = dot(&self.mass_weights[k], v) / self.groups.measures[k];
            for (x, c) in v.iter_mut().zip(chi) {
                *x -= s * c;
            }
        }
    }

    pub fn group_means(&self, u: &[f64]) -> Vec<f64> {
        (0..self.groups.len()).map(|k| dot(&self.mass_weights[k], u) / self.groups.measures[k]).collect()
    }

    /// r_k = ∫_{group k} θ f (+ boundary flux), i.e. χ_k·F.
    pub fn compatibility_residuals(&self) -> Vec<f64> {
        self.groups.chi.iter().map(|chi| dot(chi, &self.f)).collect()
    }

    /// Checks |r_k| ≤ tol_k with tol_k = `tol` if given, else
    /// 1e-8 · μ(group) · max|f|.
    pub fn compatibility_check(&self, tol: Option<f64>) -> Result<Vec<f64>, SolverError> {
        let r = self.compatibility_residuals();
        let mut failing = Vec::new();
        let mut worst_tol: f64 = 0.0;
        for (k, rk) in r.iter().enumerate() {
            let t = tol.unwrap_or(1e-8 * self.groups.measures[k] * self.load_scale[k]);
            worst_tol = worst_tol.max(t);
            if !(rk.abs() <= t) {
                failing.push(k);
            }
        }
        if failing.is_empty() {
            Ok(r)
        } else {
            Err(SolverError::IncompatibleRhs { groups: failing, residuals: r, tol: worst_tol })
        }
    }

    /// ½(Au,u) − (F,u).
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * dot(&self.a.matvec(u), u) - dot(&self.f, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    /// Defaults to 20 × DOF count.
    pub maxiter: Option<usize>,
    pub compat_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, maxiter: None, compat_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub group_means: Vec<f64>,
    pub energy: f64,
    pub compatibility_residuals: Vec<f64>,
    pub n_dofs: usize,
    pub lambda: f64,
}

struct CgResult {
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Jacobi-preconditioned CG on the subspace of zero group means. `rhs`
/// must already be dual-projected. When the recursive residual meets the
/// tolerance but the true one does not, CG restarts from the true residual.
fn projected_cg(sys: &LinearSystem, rhs: &[f64], x0: Option<&[f64]>, tol: f64, maxiter: usize) -> CgResult {
    const RESTARTS: usize = 5;
    let n = rhs.len();
    let diag: Vec<f64> = sys.a.diagonal().into_iter().map(|d| if d > 0.0 { d } else { 1.0 }).collect();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    sys.project_primal(&mut x);
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return CgResult { x: vec![0.0; n], iterations: 0, residual: 0.0, converged: true };
    }
    let true_residual = |x: &[f64]| -> Vec<f64> {
        let ax = sys.a.matvec(x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        sys.project_dual(&mut r);
        r
    };
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        sys.project_primal(&mut z);
        z
    };
    let mut it = 0;
    let mut ax = vec![0.0; n];
    let mut r = true_residual(&x);
    let mut residual = norm(&r) / bnorm;
    for _ in 0..=RESTARTS {
        if residual <= tol {
            break;
        }
        let mut z = precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut res = residual;
        while res > tol && it < maxiter {
            sys.a.matvec_into(&p, &mut ax);
            let pap = dot(&p, &ax);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ax[i];
            }
            sys.project_dual(&mut r);
            it += 1;
            res = norm(&r) / bnorm;
            z = precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        sys.project_primal(&mut x);
        r = true_residual(&x);
        residual = norm(&r) / bnorm;
        if it >= maxiter {
            break;
        }
    }
    CgResult { x, iterations: it, residual, converged: residual <= tol }
}

/// Solves the assembled system (compatibility is checked by the caller).
pub fn solve_neumann(
    sys: &LinearSystem,
    opts: &SolveOptions,
    x0: Option<&[f64]>,
) -> Result<(MuFunction, SolveReport), SolverError> {
    let n = sys.f.len();
    let maxiter = opts.maxiter.unwrap_or(20 * n);
    let mut rhs = sys.f.clone();
    sys.project_dual(&mut rhs);
    let out = projected_cg(sys, &rhs, x0, opts.tol, maxiter);
    if !out.converged {
        return Err(SolverError::NoConvergence { iterations: out.iterations, residual: out.residual });
    }
    let report = SolveReport {
        iterations: out.iterations,
        relative_residual: out.residual,
        group_means: sys.group_means(&out.x),
        energy: sys.energy(&out.x),
        compatibility_residuals: sys.compatibility_residuals(),
        n_dofs: n,
        lambda: sys.lambda,
    };
    let u = MuFunction { space: sys.space.clone(), values: out.x };
    Ok((u, report))
}

/// Relax, assemble, check compatibility and solve on a conforming space.
pub fn solve(
    structure: &Arc<Structure>,
    coefficients: &MatrixField,
    load: &Load,
    opts: &SolveOptions,
) -> Result<(MuFunction, SolveReport), SolverError> {
    let space = FunctionSpace::new(structure.clone());
    let relaxed = relaxation::relax(coefficients, structure)?;
    let sys = assemble(&space, &relaxed, load, None)?;
    sys.compatibility_check(opts.compat_tol)?;
    solve_neumann(&sys, opts, None)
}

/// Penalty variant: junction DOFs are duplicated and the trace gap is
/// penalized with weight `eta`. Kernel groups are those of the conforming
/// structure.
pub fn solve_penalty(
    structure: &Arc<Structure>,
    coefficients: &MatrixField,
    load: &Load,
    eta: f64,
    opts: &SolveOptions,
) -> Result<(MuFunction, SolveReport), SolverError> {
    let space = FunctionSpace::with_coupling(structure.clone(), Coupling::Broken);
    let relaxed = relaxation::relax(coefficients, structure)?;
    let sys = assemble(&space, &relaxed, load, Some(eta))?;
    sys.compatibility_check(opts.compat_tol)?;
    solve_neumann(&sys, opts, None)
}

/// Relative change of the eigenvalue estimate at which inverse iteration stops.
pub const POINCARE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareEstimate {
    pub group: usize,
    pub lambda_min: f64,
    pub constant: f64,
    pub iterations: usize,
}

/// C_k = 1/λ_min⁺ of A v = λ M v on group `k` with zero group mean, by
/// inverse power iteration.
pub fn poincare_constant(sys: &LinearSystem, k: usize, seed: u64) -> Result<PoincareEstimate, SolverError> {
    const MAX_ITER: usize = 1000;
    let n = sys.f.len();
    let chi = &sys.groups.chi[k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = chi.iter().map(|&c| if c > 0.0 { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
    sys.project_primal(&mut v);
    let fail = |reason: String| SolverError::EigenFailure { group: k, reason };
    let mut lambda_prev = f64::NAN;
    for it in 1..=MAX_ITER {
        let mnorm = dot(&sys.m.matvec(&v), &v).sqrt();
        if !(mnorm > 0.0) {
            return Err(fail("iterate vanished".into()));
        }
        v.iter_mut().for_each(|x| *x /= mnorm);
        let mut rhs = sys.m.matvec(&v);
        for (r, c) in rhs.iter_mut().zip(chi) {
            *r *= c;
        }
        sys.project_dual(&mut rhs);
        let out = projected_cg(sys, &rhs, Some(&v), 1e-12, 20 * n);
        if !out.converged {
            return Err(fail(format!("inner solve stalled at residual {:e}", out.residual)));
        }
        let w = out.x;
        let lambda = dot(&sys.a.matvec(&w), &w) / dot(&sys.m.matvec(&w), &w);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(fail(format!("non-positive Rayleigh quotient {lambda:e}")));
        }
        v = w;
        if (lambda - lambda_prev).abs() <= POINCARE_REL_TOL * lambda {
            return Ok(PoincareEstimate { group: k, lambda_min: lambda, constant: 1.0 / lambda, iterations: it });
        }
        lambda_prev = lambda;
    }
    Err(fail(format!("no convergence in {MAX_ITER} iterations")))
}

#[cfg(test)]
mod tests;
