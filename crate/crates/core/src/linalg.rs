//! Tiny fixed-size vector/matrix helpers for R³ geometry.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn axpy(y: Vec3, s: f64, x: Vec3) -> Vec3 {
    [y[0] + s * x[0], y[1] + s * x[1], y[2] + s * x[2]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

pub fn identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r] * b[c];
        }
    }
    m
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    m
}

pub fn mat_add(a: &Mat3, b: &Mat3, s: f64) -> Mat3 {
    let mut m = *a;
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] += s * b[r][c];
        }
    }
    m
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = a[c][r];
        }
    }
    m
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut out: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            out = out.max((a[r][c] - b[r][c]).abs());
        }
    }
    out
}

pub fn frobenius(a: &Mat3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Orthogonal projector onto the span of `vectors`, together with an
/// orthonormal basis of that span. Vectors whose residual after
/// Gram–Schmidt falls below `tol` are treated as dependent.
pub fn span_projector(vectors: &[Vec3], tol: f64) -> (Vec<Vec3>, Mat3) {
    let mut basis: Vec<Vec3> = Vec::new();
    for &v in vectors {
        let mut w = v;
        // two passes of modified Gram–Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                w = axpy(w, -dot(w, *b), *b);
            }
        }
        let n = norm(w);
        if n > tol * norm(v).max(1.0) {
            basis.push(scale(w, 1.0 / n));
        }
    }
    let mut p = [[0.0; 3]; 3];
    for b in &basis {
        p = mat_add(&p, &outer(*b, *b), 1.0);
    }
    (basis, p)
}

pub fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm2(a: [f64; 2]) -> f64 {
    dot2(a, a).sqrt()
}

/// Distance from `p` to the closed segment `[a, b]` in the plane.
pub fn point_segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub2(b, a);
    let len2 = dot2(ab, ab);
    let t = if len2 == 0.0 { 0.0 } else { (dot2(sub2(p, a), ab) / len2).clamp(0.0, 1.0) };
    norm2(sub2(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Distance from `p` to the closed segment `[a, b]` in R³.
pub fn point_segment_dist3(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 == 0.0 { 0.0 } else { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) };
    dist(p, axpy(a, t, ab))
}

/// Minimum distance between two closed segments in R³ (sampled exactly via
/// the standard clamped closest-point computation).
pub fn segment_segment_dist3(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return dist(p0, q0);
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    dist(axpy(p0, s, d1), axpy(q0, t, d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_of_two_lines_has_rank_two() {
        let (basis, p) = span_projector(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]], 1e-10);
        assert_eq!(basis.len(), 2);
        assert!(max_abs_diff(&p, &[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]) < 1e-15);
    }

    #[test]
    fn segment_distances() {
        let d = segment_segment_dist3([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-15);
        assert!((point_segment_dist2([0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
