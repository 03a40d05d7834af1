//! Relaxation of a symmetric coefficient field onto the μ-tangent bundle:
//! B_μ = B − Σ Be_i ⊗ Be_i / (Be_i, e_i) over a B-orthonormal basis
//! {e_i} of W = T_μ^⊥ ∩ Im B.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{self, Expr, ExprError, Var};
use crate::geometry::{QuadratureOrder, Structure, TangentFrame};
use crate::linalg::{self, Mat3, Vec3};

/// Residual allowed when testing T_μ ⊆ Im B.
pub const IMAGE_TOL: f64 = 1e-10;
/// Eigenvalue threshold deciding the dimension of W.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxationError {
    #[error("coefficient matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("tangent space is not contained in the image of B (residual {0:e})")]
    TangentNotInImage(f64),
    #[error("coefficient matrix is not elliptic on its image (lambda = {0:e})")]
    NotElliptic(f64),
    #[error("dimension of the normal part of the image is ambiguous (eigenvalue {0:e})")]
    RankDeficiency(f64),
    #[error("coefficient matrix is not finite at {0:?}")]
    NotFinite(Vec3),
    #[error("coefficient b{0}{1}: {2}")]
    Expr(usize, usize, ExprError),
}

/// Symmetric 3×3 field of expressions; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    upper: [Expr; 6],
}

const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl MatrixField {
    pub fn identity() -> Self {
        let one = Expr::num(1.0);
        let zero = Expr::num(0.0);
        MatrixField { upper: [one.clone(), zero.clone(), zero.clone(), one.clone(), zero, one] }
    }

    pub fn constant(m: &Mat3) -> Self {
        MatrixField { upper: UPPER.map(|(r, c)| Expr::num(m[r][c])) }
    }

    /// Builds the field from entries `b_rc` (1-based, `r ≤ c`); missing
    /// entries default to the identity. Lower-triangle keys are accepted
    /// when the mirrored key is absent.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, RelaxationError> {
        let mut field = Self::identity();
        let mut seen = [false; 6];
        for (key, text) in entries {
            let idx = parse_key(key).ok_or_else(|| {
                RelaxationError::Expr(0, 0, ExprError::UnknownIdentifier { name: key.to_string(), offset: 0 })
            })?;
            let (r, c) = (idx.0.min(idx.1), idx.0.max(idx.1));
            let k = UPPER.iter().position(|&u| u == (r, c)).unwrap_or(0);
            let e = exprlang::parse(text).map_err(|e| RelaxationError::Expr(r + 1, c + 1, e))?;
            if seen[k] && field.upper[k] != e {
                return Err(RelaxationError::NotSymmetric(f64::NAN));
            }
            seen[k] = true;
            field.upper[k] = e;
        }
        Ok(field)
    }

    pub fn entry(&self, r: usize, c: usize) -> &Expr {
        let (a, b) = (r.min(c), r.max(c));
        &self.upper[UPPER.iter().position(|&u| u == (a, b)).unwrap_or(0)]
    }

    pub fn is_constant(&self) -> bool {
        self.upper.iter().all(|e| Var::ALL.iter().all(|v| !e.depends_on(*v)))
    }

    pub fn eval(&self, p: Vec3) -> Result<Mat3, RelaxationError> {
        let mut m = [[0.0; 3]; 3];
        for (k, &(r, c)) in UPPER.iter().enumerate() {
            let v = self.upper[k].eval_at(p).map_err(|e| RelaxationError::Expr(r + 1, c + 1, e))?;
            if !v.is_finite() {
                return Err(RelaxationError::NotFinite(p));
            }
            m[r][c] = v;
            m[c][r] = v;
        }
        Ok(m)
    }
}

fn parse_key(key: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix('b')?;
    let mut chars = rest.chars();
    let r = chars.next()?.to_digit(10)? as usize;
    let c = chars.next()?.to_digit(10)? as usize;
    if chars.next().is_some() || !(1..=3).contains(&r) || !(1..=3).contains(&c) {
        return None;
    }
    Some((r - 1, c - 1))
}

fn eigen(m: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let nm = Matrix3::from_fn(|r, c| m[r][c]);
    let se = SymmetricEigen::new(nm);
    let vals = [se.eigenvalues[0], se.eigenvalues[1], se.eigenvalues[2]];
    let vecs = [0, 1, 2].map(|k| {
        let col = se.eigenvectors.column(k);
        [col[0], col[1], col[2]]
    });
    (vals, vecs)
}

/// Projector onto Im B together with the nonzero eigenvalues of B.
fn image_of(b: &Mat3) -> (Mat3, Vec<f64>) {
    let (vals, vecs) = eigen(b);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut p = [[0.0; 3]; 3];
    let mut nonzero = Vec::new();
    for k in 0..3 {
        if vals[k].abs() > 1e-12 * scale {
            p = linalg::mat_add(&p, &linalg::outer(vecs[k], vecs[k]), 1.0);
            nonzero.push(vals[k]);
        }
    }
    (p, nonzero)
}

/// Checks symmetry, T_μ(x) ⊆ Im B(x) and ellipticity on Im B; returns
/// λ = min Rayleigh quotient of B over Im B.
pub fn admissibility_check(b: &Mat3, frame: &TangentFrame) -> Result<f64, RelaxationError> {
    let asym = linalg::max_abs_diff(b, &linalg::transpose(b));
    if asym > 1e-12 * linalg::frobenius(b).max(1.0) {
        return Err(RelaxationError::NotSymmetric(asym));
    }
    let (p_im, nonzero) = image_of(b);
    for t in &frame.basis {
        let residual = linalg::norm(linalg::sub(*t, linalg::mat_vec(&p_im, *t)));
        if residual > IMAGE_TOL {
            return Err(RelaxationError::TangentNotInImage(residual));
        }
    }
    let lambda = nonzero.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lambda > 0.0) {
        return Err(RelaxationError::NotElliptic(if lambda.is_finite() { lambda } else { 0.0 }));
    }
    Ok(lambda)
}

/// B-orthonormal basis of W = T_μ(x)^⊥ ∩ Im B(x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSet {
    pub vectors: Vec<Vec3>,
}

impl BasisSet {
    pub fn l(&self) -> usize {
        self.vectors.len()
    }
}

/// Orthonormal (Euclidean) basis of W from the eigenvectors of
/// P^⊥ P_im P^⊥ with eigenvalue 1.
fn w_basis(b: &Mat3, frame: &TangentFrame) -> Result<Vec<Vec3>, RelaxationError> {
    let (p_im, _) = image_of(b);
    let perp = &frame.normal_projector;
    let m = linalg::mat_mul(perp, &linalg::mat_mul(&p_im, perp));
    let (vals, vecs) = eigen(&m);
    let mut out = Vec::new();
    for k in 0..3 {
        if vals[k] >= 1.0 - RANK_TOL {
            out.push(vecs[k]);
        } else if vals[k] > RANK_TOL {
            return Err(RelaxationError::RankDeficiency(vals[k]));
        }
    }
    Ok(out)
}

/// Gram–Schmidt in the inner product (u, v)_B = (Bu, v).
fn b_gram_schmidt(b: &Mat3, vectors: &[Vec3]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    for &v in vectors {
        let mut w = v;
        for _ in 0..2 {
            for e in &out {
                let c = linalg::dot(linalg::mat_vec(b, w), *e);
                w = linalg::axpy(w, -c, *e);
            }
        }
        let n = linalg::dot(linalg::mat_vec(b, w), w).sqrt();
        out.push(linalg::scale(w, 1.0 / n));
    }
    out
}

pub fn b_orthonormal_basis(b: &Mat3, frame: &TangentFrame) -> Result<BasisSet, RelaxationError> {
    let w = w_basis(b, frame)?;
    Ok(BasisSet { vectors: b_gram_schmidt(b, &w) })
}

/// Same as [`b_orthonormal_basis`], but starts Gram–Schmidt from a
/// random rotation of the spanning set of W.
pub fn b_orthonormal_basis_randomized<R: Rng>(
    b: &Mat3,
    frame: &TangentFrame,
    rng: &mut R,
) -> Result<BasisSet, RelaxationError> {
    let w = w_basis(b, frame)?;
    let l = w.len();
    let mut mixed = Vec::with_capacity(l);
    for _ in 0..l {
        let mut v = linalg::ZERO3;
        for e in &w {
            v = linalg::axpy(v, rng.random_range(-1.0..1.0), *e);
        }
        mixed.push(v);
    }
    // a degenerate draw is replaced by the plain basis
    let (independent, _) = linalg::span_projector(&mixed, 1e-3);
    let start = if independent.len() == l { mixed } else { w };
    Ok(BasisSet { vectors: b_gram_schmidt(b, &start) })
}

/// Applies the relaxation formula with a given basis.
pub fn relax_with_basis(b: &Mat3, basis: &BasisSet) -> Mat3 {
    let mut out = *b;
    for e in &basis.vectors {
        let be = linalg::mat_vec(b, *e);
        let d = linalg::dot(be, *e);
        out = linalg::mat_add(&out, &linalg::outer(be, be), -1.0 / d);
    }
    out
}

/// B_μ(x) for a single matrix and frame; also returns λ and the basis.
pub fn relax_matrix(b: &Mat3, frame: &TangentFrame) -> Result<(Mat3, f64, BasisSet), RelaxationError> {
    let lambda = admissibility_check(b, frame)?;
    let basis = b_orthonormal_basis(b, frame)?;
    Ok((relax_with_basis(b, &basis), lambda, basis))
}

/// Minimum of (Bξ, ξ) over tangent unit vectors ξ.
pub fn tangential_ellipticity(bmu: &Mat3, frame: &TangentFrame) -> f64 {
    let k = frame.rank();
    if k == 0 {
        return f64::INFINITY;
    }
    let g = DMatrix::from_fn(k, k, |r, c| linalg::dot(linalg::mat_vec(bmu, frame.basis[r]), frame.basis[c]));
    SymmetricEigen::new(g).eigenvalues.min()
}

/// Random frame of rank 1 to 3 and a random symmetric B whose image
/// contains it, with eigenvalues on the image in [0.5, 3].
pub fn random_admissible<R: Rng>(rng: &mut R) -> (Mat3, TangentFrame) {
    let unit = |rng: &mut R| loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = linalg::norm(v);
        if n > 0.1 && n <= 1.0 {
            return linalg::scale(v, 1.0 / n);
        }
    };
    let rank = rng.random_range(1..=3);
    let vectors: Vec<Vec3> = (0..rank).map(|_| unit(rng)).collect();
    let frame = TangentFrame::from_vectors(linalg::ZERO3, &vectors);
    let image_dim = rng.random_range(frame.rank()..=3);
    let mut spanning = frame.basis.clone();
    while linalg::span_projector(&spanning, 1e-6).0.len() < image_dim {
        spanning.push(unit(rng));
    }
    let (image, _) = linalg::span_projector(&spanning, 1e-6);
    let mut b = [[0.0; 3]; 3];
    // a random rotation inside the image, then positive weights
    let mixed: Vec<Vec3> = image
        .iter()
        .map(|_| image.iter().fold(linalg::ZERO3, |acc, e| linalg::axpy(acc, rng.random_range(-1.0..1.0), *e)))
        .collect();
    let (axes, _) = linalg::span_projector(&mixed, 1e-3);
    let axes = if axes.len() == image.len() { axes } else { image };
    for a in axes {
        b = linalg::mat_add(&b, &linalg::outer(a, a), rng.random_range(0.5..3.0));
    }
    // exact symmetry
    for r in 0..3 {
        for c in 0..r {
            b[r][c] = b[c][r];
        }
    }
    (b, frame)
}

/// min (Bη, η) over η with P_μη = ξ, by the normal equations on T_μ^⊥
/// solved with a pseudo-inverse.
pub fn variational_minimum(b: &Mat3, frame: &TangentFrame, xi: Vec3) -> f64 {
    let normals = {
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let projected: Vec<Vec3> = axes.iter().map(|a| linalg::mat_vec(&frame.normal_projector, *a)).collect();
        linalg::span_projector(&projected, 1e-8).0
    };
    let k = normals.len();
    if k == 0 {
        return linalg::dot(linalg::mat_vec(b, xi), xi);
    }
    let bn: Vec<Vec3> = normals.iter().map(|n| linalg::mat_vec(b, *n)).collect();
    let g = DMatrix::from_fn(k, k, |r, c| linalg::dot(bn[r], normals[c]));
    let rhs = DMatrix::from_fn(k, 1, |r, _| -linalg::dot(bn[r], xi));
    let coef = g.pseudo_inverse(1e-12).expect("pseudo-inverse of a symmetric matrix") * rhs;
    let eta = (0..k).fold(xi, |acc, r| linalg::axpy(acc, coef[(r, 0)], normals[r]));
    linalg::dot(linalg::mat_vec(b, eta), eta)
}

/// Worst deviations seen by [`random_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxSuite {
    pub cases: usize,
    pub basis_independence: f64,
    pub annihilation: f64,
    pub variational_gap: f64,
    pub pass: bool,
}

/// Basis independence (1e-10), annihilation of the basis (1e-9) and the
/// variational characterization (1e-8) on `cases` random admissible B.
pub fn random_suite(cases: usize, seed: u64) -> Result<RelaxSuite, RelaxationError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = RelaxSuite { cases, basis_independence: 0.0, annihilation: 0.0, variational_gap: 0.0, pass: true };
    for _ in 0..cases {
        let (b, frame) = random_admissible(&mut rng);
        admissibility_check(&b, &frame)?;
        let e1 = b_orthonormal_basis_randomized(&b, &frame, &mut rng)?;
        let e2 = b_orthonormal_basis_randomized(&b, &frame, &mut rng)?;
        let m1 = relax_with_basis(&b, &e1);
        let m2 = relax_with_basis(&b, &e2);
        out.basis_independence = out.basis_independence.max(linalg::max_abs_diff(&m1, &m2));
        for e in e1.vectors.iter().chain(&e2.vectors) {
            out.annihilation = out.annihilation.max(linalg::norm(linalg::mat_vec(&m1, *e)));
        }
        let coeffs: Vec<f64> = frame.basis.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let xi = frame.basis.iter().zip(&coeffs).fold(linalg::ZERO3, |acc, (t, c)| linalg::axpy(acc, *c, *t));
        let quad = linalg::dot(linalg::mat_vec(&m1, xi), xi);
        out.variational_gap = out.variational_gap.max((quad - variational_minimum(&b, &frame, xi)).abs());
    }
    out.pass = out.basis_independence <= 1e-10 && out.annihilation <= 1e-9 && out.variational_gap <= 1e-8;
    Ok(out)
}

/// B_μ sampled at the standard quadrature points of every element.
/// Quadrature points of component `c` use the tangent space of `c`:
/// junctions carry no μ-measure.
#[derive(Debug, Clone)]
pub struct RelaxedField {
    /// `values[c][e * nq + q]`.
    pub values: Vec<Vec<Mat3>>,
    pub points_per_element: Vec<usize>,
    pub lambda: f64,
    /// Smallest tangential Rayleigh quotient of B_μ over all samples.
    pub tangential_min: f64,
    /// Per component: max |B_μ(x) − B_μ(y)| / |x − y| over mesh edges.
    pub lipschitz: Vec<f64>,
}

impl RelaxedField {
    pub fn at(&self, c: usize, e: usize, q: usize) -> &Mat3 {
        &self.values[c][e * self.points_per_element[c] + q]
    }
}

pub fn component_frame(structure: &Structure, c: usize, at: Vec3) -> TangentFrame {
    TangentFrame::from_vectors(at, &structure.components[c].tangents)
}

pub fn relax(field: &MatrixField, structure: &Structure) -> Result<RelaxedField, RelaxationError> {
    let constant = field.is_constant();
    let mut values = Vec::with_capacity(structure.components.len());
    let mut per_el = Vec::with_capacity(structure.components.len());
    let mut lambda = f64::INFINITY;
    let mut tangential_min = f64::INFINITY;
    let mut lipschitz = Vec::with_capacity(structure.components.len());
    for (c, mesh) in structure.meshes.iter().enumerate() {
        let frame = component_frame(structure, c, linalg::ZERO3);
        let mut cache: Option<Mat3> = None;
        let mut eval = |p: Vec3| -> Result<Mat3, RelaxationError> {
            if let (true, Some(m)) = (constant, cache) {
                return Ok(m);
            }
            let b = field.eval(p)?;
            let (bmu, lam, _) = relax_matrix(&b, &frame)?;
            lambda = lambda.min(lam);
            tangential_min = tangential_min.min(tangential_ellipticity(&bmu, &frame));
            cache = Some(bmu);
            Ok(bmu)
        };
        let mut vals = Vec::new();
        let mut nq = 0;
        for e in 0..mesh.n_elements() {
            let pts = mesh.quadrature(e, QuadratureOrder::Standard);
            nq = pts.len();
            for (p, _) in pts {
                vals.push(eval(p)?);
            }
        }
        let mut lip: f64 = 0.0;
        if !constant {
            let nodal: Vec<Mat3> = mesh.points.iter().map(|p| eval(*p)).collect::<Result<_, _>>()?;
            for [a, b] in mesh.edges() {
                let d = linalg::dist(mesh.points[a], mesh.points[b]);
                let diff = linalg::frobenius(&linalg::mat_add(&nodal[a], &nodal[b], -1.0));
                lip = lip.max(diff / d);
            }
        }
        values.push(vals);
        per_el.push(nq);
        lipschitz.push(lip);
    }
    Ok(RelaxedField { values, points_per_element: per_el, lambda, tangential_min, lipschitz })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(vectors: &[Vec3]) -> TangentFrame {
        TangentFrame::from_vectors([0.0; 3], vectors)
    }

    const EX: Vec3 = [1.0, 0.0, 0.0];
    const EY: Vec3 = [0.0, 1.0, 0.0];
    const EZ: Vec3 = [0.0, 0.0, 1.0];

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]]
    }

    #[test]
    fn admissibility_examples() {
        assert_eq!(admissibility_check(&linalg::identity(), &frame(&[EX, EY])).unwrap(), 1.0);
        assert!(matches!(
            admissibility_check(&diag(1.0, 1.0, 0.0), &frame(&[EX, EZ])),
            Err(RelaxationError::TangentNotInImage(_))
        ));
        assert!((admissibility_check(&diag(2.0, 1.0, 1.0), &frame(&[EX])).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            admissibility_check(&diag(1.0, -1.0, 1.0), &frame(&[EX])),
            Err(RelaxationError::NotElliptic(_))
        ));
    }

    #[test]
    fn basis_examples() {
        let b = b_orthonormal_basis(&linalg::identity(), &frame(&[EX, EY])).unwrap();
        assert_eq!(b.l(), 1);
        assert!((b.vectors[0][2].abs() - 1.0).abs() < 1e-15);
        assert_eq!(b_orthonormal_basis(&linalg::identity(), &frame(&[EX, EY, EZ])).unwrap().l(), 0);
        let b = b_orthonormal_basis(&diag(2.0, 1.0, 1.0), &frame(&[EX])).unwrap();
        assert_eq!(b.l(), 2);
        for e in &b.vectors {
            assert!(e[0].abs() < 1e-15);
        }
    }

    #[test]
    fn relax_examples() {
        let (m, _, _) = relax_matrix(&linalg::identity(), &frame(&[EX, EY])).unwrap();
        assert!(linalg::max_abs_diff(&m, &diag(1.0, 1.0, 0.0)) < 1e-15);
        let (m, _, _) = relax_matrix(&diag(2.0, 1.0, 1.0), &frame(&[EX])).unwrap();
        assert!(linalg::max_abs_diff(&m, &diag(2.0, 0.0, 0.0)) < 1e-15);
        let b = [[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]];
        let (m, _, basis) = relax_matrix(&b, &frame(&[EX, EY, EZ])).unwrap();
        assert_eq!(basis.l(), 0);
        assert_eq!(m, b);
    }

    #[test]
    fn entries_parse() {
        let f = MatrixField::from_entries([("b11", "2"), ("b23", "x"), ("b32", "x")]).unwrap();
        let m = f.eval([0.5, 0.0, 0.0]).unwrap();
        assert_eq!(m, [[2.0, 0.0, 0.0], [0.0, 1.0, 0.5], [0.0, 0.5, 1.0]]);
        assert!(MatrixField::from_entries([("b23", "x"), ("b32", "y")]).is_err());
        assert!(MatrixField::from_entries([("b44", "1")]).is_err());
    }

    #[test]
    fn random_suite_passes() {
        let suite = random_suite(100, 11).unwrap();
        assert!(suite.pass, "{suite:?}");
    }
}
