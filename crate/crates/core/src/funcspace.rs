//! Discrete H¹_μ: P1 functions on every component mesh, with DOFs shared
//! across coupled junctions.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::exprlang::{Expr, ExprError};
use crate::geometry::Structure;
use crate::linalg::{self, Vec3};

pub use crate::geometry::QuadratureOrder;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuncSpaceError {
    #[error("component {side} is not a side of junction {junction}")]
    SideNotInJunction { junction: usize, side: u32 },
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("expected {expected} per-component expressions, got {got}")]
    ComponentCount { got: usize, expected: usize },
    #[error("evaluation failed on component {component}: {source}")]
    Eval { component: u32, source: ExprError },
}

/// Whether coupled junction nodes share a DOF (`Conforming`) or keep one
/// DOF per side (`Broken`, used by the penalty variant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Conforming,
    Broken,
}

/// Node → global DOF table.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// `node_dof[c][n]` is the DOF of node `n` of component `c`.
    pub node_dof: Vec<Vec<usize>>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn new(structure: &Structure, coupling: Coupling) -> Self {
        let offsets: Vec<usize> = structure
            .meshes
            .iter()
            .scan(0, |acc, m| {
                let o = *acc;
                *acc += m.n_nodes();
                Some(o)
            })
            .collect();
        let total = structure.n_nodes();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        if coupling == Coupling::Conforming {
            for (j, nodes) in structure.junctions.iter().zip(&structure.junction_nodes) {
                if !j.coupled {
                    continue;
                }
                for &(a, b) in &nodes.pairs {
                    let ra = find(&mut parent, offsets[j.first] + a);
                    let rb = find(&mut parent, offsets[j.second] + b);
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                }
            }
        }
        let mut dof_of_root = vec![usize::MAX; total];
        let mut n_dofs = 0;
        let mut node_dof = Vec::with_capacity(structure.meshes.len());
        for (c, mesh) in structure.meshes.iter().enumerate() {
            let mut row = Vec::with_capacity(mesh.n_nodes());
            for n in 0..mesh.n_nodes() {
                let r = find(&mut parent, offsets[c] + n);
                if dof_of_root[r] == usize::MAX {
                    dof_of_root[r] = n_dofs;
                    n_dofs += 1;
                }
                row.push(dof_of_root[r]);
            }
            node_dof.push(row);
        }
        DofMap { node_dof, n_dofs }
    }
}

/// P1 space over a structure.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    pub structure: Arc<Structure>,
    pub dofmap: DofMap,
    pub coupling: Coupling,
}

impl FunctionSpace {
    pub fn new(structure: Arc<Structure>) -> Arc<Self> {
        Self::with_coupling(structure, Coupling::Conforming)
    }

    pub fn with_coupling(structure: Arc<Structure>, coupling: Coupling) -> Arc<Self> {
        let dofmap = DofMap::new(&structure, coupling);
        Arc::new(FunctionSpace { structure, dofmap, coupling })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs
    }

    /// Density of component `c` at an ambient point. Positivity was checked
    /// at build time on nodes and standard quadrature points.
    pub fn theta(&self, c: usize, p: Vec3) -> f64 {
        self.structure.components[c].density.eval_at(p).unwrap_or(f64::NAN)
    }

    /// `∫_{S_c} θ g dH` for a pointwise integrand `g(element, bary, point)`.
    pub fn integrate<F>(&self, c: usize, order: QuadratureOrder, mut g: F) -> f64
    where
        F: FnMut(usize, [f64; 3], Vec3) -> f64,
    {
        let mesh = &self.structure.meshes[c];
        let mut total = 0.0;
        for e in 0..mesh.n_elements() {
            for (b, w) in mesh.quadrature_bary(e, order) {
                let p = mesh.point_from_bary(e, b);
                total += w * self.theta(c, p) * g(e, b, p);
            }
        }
        total
    }

    /// μ(S_c).
    pub fn component_measure(&self, c: usize) -> f64 {
        self.integrate(c, QuadratureOrder::Standard, |_, _, _| 1.0)
    }
}

/// Trace of a function on a junction, parameterized by arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
}

/// An element of the discrete H¹_μ.
#[derive(Debug, Clone)]
pub struct MuFunction {
    pub space: Arc<FunctionSpace>,
    pub values: Vec<f64>,
}

impl MuFunction {
    pub fn zeros(space: &Arc<FunctionSpace>) -> Self {
        MuFunction { space: space.clone(), values: vec![0.0; space.n_dofs()] }
    }

    pub fn from_values(space: &Arc<FunctionSpace>, values: Vec<f64>) -> Result<Self, FuncSpaceError> {
        if values.len() != space.n_dofs() {
            return Err(FuncSpaceError::LengthMismatch { got: values.len(), expected: space.n_dofs() });
        }
        Ok(MuFunction { space: space.clone(), values })
    }

    /// Nodal interpolant of an ambient expression.
    pub fn interpolate(space: &Arc<FunctionSpace>, f: &Expr) -> Result<Self, FuncSpaceError> {
        let n = space.structure.components.len();
        Self::interpolate_per_component(space, &vec![f.clone(); n])
    }

    /// Nodal interpolant of one expression per component. A shared DOF takes
    /// the value from the lowest-indexed component that owns it.
    pub fn interpolate_per_component(space: &Arc<FunctionSpace>, fs: &[Expr]) -> Result<Self, FuncSpaceError> {
        let st = &space.structure;
        if fs.len() != st.components.len() {
            return Err(FuncSpaceError::ComponentCount { got: fs.len(), expected: st.components.len() });
        }
        let mut values = vec![0.0; space.n_dofs()];
        let mut set = vec![false; space.n_dofs()];
        for (c, (mesh, f)) in st.meshes.iter().zip(fs).enumerate() {
            for (n, p) in mesh.points.iter().enumerate() {
                let d = space.dofmap.node_dof[c][n];
                if set[d] {
                    continue;
                }
                values[d] =
                    f.eval_at(*p).map_err(|source| FuncSpaceError::Eval { component: st.components[c].id, source })?;
                set[d] = true;
            }
        }
        Ok(MuFunction { space: space.clone(), values })
    }

    /// Nodal values of the restriction u_c.
    pub fn component_values(&self, c: usize) -> Vec<f64> {
        self.space.dofmap.node_dof[c].iter().map(|&d| self.values[d]).collect()
    }

    pub fn node_value(&self, c: usize, n: usize) -> f64 {
        self.values[self.space.dofmap.node_dof[c][n]]
    }

    /// Value of u_c at a local point of component `c`, if inside.
    pub fn eval_local(&self, c: usize, local: [f64; 2]) -> Option<f64> {
        let mesh = &self.space.structure.meshes[c];
        let (e, b) = mesh.locate(local)?;
        Some(mesh.element(e).iter().enumerate().map(|(k, &n)| b[k] * self.node_value(c, n)).sum())
    }

    /// Value of u_c at an ambient point on component `c`.
    pub fn eval_on(&self, c: usize, p: Vec3) -> Option<f64> {
        let comp = &self.space.structure.components[c];
        let (local, off) = comp.to_local(p);
        if off > 1e-9 {
            return None;
        }
        self.eval_local(c, local)
    }

    fn value_in_element(&self, c: usize, e: usize, b: [f64; 3]) -> f64 {
        let mesh = &self.space.structure.meshes[c];
        mesh.element(e).iter().enumerate().map(|(k, &n)| b[k] * self.node_value(c, n)).sum()
    }

    /// Constant tangential gradient of u_c on element `e`.
    pub fn element_gradient(&self, c: usize, e: usize) -> Vec3 {
        let mesh = &self.space.structure.meshes[c];
        let mut g = linalg::ZERO3;
        for (k, &n) in mesh.element(e).iter().enumerate() {
            g = linalg::axpy(g, self.node_value(c, n), mesh.grads(e)[k]);
        }
        g
    }

    /// ∇_μ u: per component, per element.
    pub fn mu_gradient(&self) -> Vec<Vec<Vec3>> {
        (0..self.space.structure.components.len())
            .map(|c| (0..self.space.structure.meshes[c].n_elements()).map(|e| self.element_gradient(c, e)).collect())
            .collect()
    }

    pub fn l2mu_norm_sq_on(&self, c: usize) -> f64 {
        self.space.integrate(c, QuadratureOrder::Standard, |e, b, _| self.value_in_element(c, e, b).powi(2))
    }

    pub fn grad_norm_sq_on(&self, c: usize) -> f64 {
        self.space.integrate(c, QuadratureOrder::Standard, |e, _, _| {
            let g = self.element_gradient(c, e);
            linalg::dot(g, g)
        })
    }

    pub fn l2mu_norm(&self) -> f64 {
        (0..self.space.structure.components.len()).map(|c| self.l2mu_norm_sq_on(c)).sum::<f64>().sqrt()
    }

    /// ‖u‖_μ = (‖u‖²_{L²_μ} + ‖∇_μu‖²_{L²_μ})^{1/2}.
    pub fn h1mu_norm(&self) -> f64 {
        (0..self.space.structure.components.len())
            .map(|c| self.l2mu_norm_sq_on(c) + self.grad_norm_sq_on(c))
            .sum::<f64>()
            .sqrt()
    }

    /// Restriction of u_side to the junction nodes of junction `j`.
    pub fn trace_on(&self, j: usize, side: u32) -> Result<Trace, FuncSpaceError> {
        let st = &self.space.structure;
        let junction = &st.junctions[j];
        let nodes = &st.junction_nodes[j];
        let values = if st.components[junction.first].id == side {
            nodes.pairs.iter().map(|&(a, _)| self.node_value(junction.first, a)).collect()
        } else if st.components[junction.second].id == side {
            nodes.pairs.iter().map(|&(_, b)| self.node_value(junction.second, b)).collect()
        } else {
            return Err(FuncSpaceError::SideNotInJunction { junction: j, side });
        };
        Ok(Trace { params: nodes.params.clone(), values })
    }

    /// μ-weighted mean over the given component indices.
    pub fn group_mean(&self, members: &[usize]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &c in members {
            num += self.space.integrate(c, QuadratureOrder::Standard, |e, b, _| self.value_in_element(c, e, b));
            den += self.space.component_measure(c);
        }
        num / den
    }

    /// `a·self + b·other` on the same space.
    pub fn lin_comb(&self, a: f64, other: &MuFunction, b: f64) -> MuFunction {
        let values = self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect();
        MuFunction { space: self.space.clone(), values }
    }

    /// CSV with one row per component node.
    pub fn to_csv(&self) -> String {
        let st = &self.space.structure;
        let mut out = String::from("component_id,node_index,x,y,z,value\n");
        for (c, mesh) in st.meshes.iter().enumerate() {
            for (n, p) in mesh.points.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:?},{:?},{:?}",
                    st.components[c].id,
                    n,
                    p[0],
                    p[1],
                    p[2],
                    self.node_value(c, n)
                );
            }
        }
        out
    }
}
