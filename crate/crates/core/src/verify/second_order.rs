use serde::Serialize;

use super::VerifyError;
use crate::exprlang::build::{mul, sum};
use crate::exprlang::{Expr, Var};
use crate::geometry::Structure;
use crate::linalg::{self, Mat3};

/// Limits on derivative expressions before giving up.
pub const MAX_DEPTH: usize = 200;
pub const MAX_NODES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrderReport {
    pub samples: usize,
    /// max |∇_μφ + b − ∇φ| with b = P^⊥∇φ.
    pub identity_residual: f64,
    /// max entrywise difference of the two routes to the tangential
    /// derivative of ∇_μφ + b.
    pub operator_residual: f64,
    pub max_residual: f64,
}

fn guard(e: &Expr) -> Result<(), VerifyError> {
    let (depth, nodes) = (e.depth(), e.node_count());
    if depth > MAX_DEPTH || nodes > MAX_NODES {
        return Err(VerifyError::SymbolicDepthExceeded { depth, nodes });
    }
    Ok(())
}

fn linear(m: &Mat3, v: &[Expr; 3]) -> [Expr; 3] {
    [0, 1, 2].map(|r| sum((0..3).map(|s| mul(Expr::num(m[r][s]), v[s].clone()))))
}

/// At element centroids of every component: checks ∇_μφ + b = ∇φ, and
/// compares the tangential derivative of W = (P + P^⊥)∇φ (differentiated
/// symbolically, then projected) with Hess(φ)·P.
pub fn second_order_residual(phi: &Expr, structure: &Structure) -> Result<SecondOrderReport, VerifyError> {
    let grad: [Expr; 3] = Var::ALL.map(|v| phi.differentiate(v));
    let hess: Vec<Vec<Expr>> = grad.iter().map(|g| Var::ALL.iter().map(|&v| g.differentiate(v)).collect()).collect();
    for e in hess.iter().flatten() {
        guard(e)?;
    }
    let mut samples = 0;
    let mut identity_residual: f64 = 0.0;
    let mut operator_residual: f64 = 0.0;
    for (c, comp) in structure.components.iter().enumerate() {
        let p = comp.projector;
        let pn = linalg::mat_add(&linalg::identity(), &p, -1.0);
        let w = {
            let tangential = linear(&p, &grad);
            let normal = linear(&pn, &grad);
            [0, 1, 2].map(|r| crate::exprlang::build::add(tangential[r].clone(), normal[r].clone()))
        };
        let dw: Vec<Vec<Expr>> = w.iter().map(|wr| Var::ALL.iter().map(|&v| wr.differentiate(v)).collect()).collect();
        for e in dw.iter().flatten() {
            guard(e)?;
        }
        let mesh = &structure.meshes[c];
        let centroid = [1.0 / 3.0; 3];
        let segment_mid = [0.5, 0.5, 0.0];
        for e in 0..mesh.n_elements() {
            let x = mesh.point_from_bary(e, if comp.dim == 1 { segment_mid } else { centroid });
            samples += 1;
            let g = [grad[0].eval_at(x)?, grad[1].eval_at(x)?, grad[2].eval_at(x)?];
            let recomposed = linalg::add(linalg::mat_vec(&p, g), linalg::mat_vec(&pn, g));
            identity_residual = identity_residual.max(linalg::norm(linalg::sub(recomposed, g)));
            let mut jw = [[0.0; 3]; 3];
            let mut h = [[0.0; 3]; 3];
            for r in 0..3 {
                for s in 0..3 {
                    jw[r][s] = dw[r][s].eval_at(x)?;
                    h[r][s] = hess[r][s].eval_at(x)?;
                }
            }
            // row r of route 1 is P∇W_r; route 2 is (H P)_r
            let route1 = linalg::mat_mul(&jw, &linalg::transpose(&p));
            let route2 = linalg::mat_mul(&h, &p);
            operator_residual = operator_residual.max(linalg::max_abs_diff(&route1, &route2));
        }
    }
    Ok(SecondOrderReport {
        samples,
        identity_residual,
        operator_residual,
        max_residual: identity_residual.max(operator_residual),
    })
}
