//! Exhaustive triangle-triangle intersection tests used by the audit.

use crate::distance::{edge_edge_distance_sq, point_triangle_distance_sq};
use crate::math::Vec3;

fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

/// Whether segment `pq` passes through triangle `abc`, non-coplanar case only.
fn segment_crosses_triangle(p: &Vec3, q: &Vec3, [a, b, c]: &[Vec3; 3]) -> bool {
    let dp = orient(a, b, c, p);
    let dq = orient(a, b, c, q);
    if (dp > 0.0 && dq > 0.0) || (dp < 0.0 && dq < 0.0) || (dp == 0.0 && dq == 0.0) {
        return false;
    }
    let s = [orient(p, q, a, b), orient(p, q, b, c), orient(p, q, c, a)];
    s.iter().all(|&v| v >= 0.0) || s.iter().all(|&v| v <= 0.0)
}

/// Squared distance between two triangles that do not cross each other.
pub fn triangle_triangle_distance_sq(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for (p, t) in t1.iter().map(|p| (p, t2)).chain(t2.iter().map(|p| (p, t1))) {
        if let Ok(r) = point_triangle_distance_sq(p, &t[0], &t[1], &t[2]) {
            best = best.min(r.d_sq);
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let (a0, a1) = (&t1[i], &t1[(i + 1) % 3]);
            let (b0, b1) = (&t2[j], &t2[(j + 1) % 3]);
            if let Ok(r) = edge_edge_distance_sq(a0, a1, b0, b1, 0.0) {
                best = best.min(r.d_sq);
            } else {
                best = best.min((a0 - b0).norm_squared());
            }
        }
    }
    best
}

/// True when the closed triangles share at least one point (touching counts).
pub fn triangles_intersect(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> bool {
    for i in 0..3 {
        if segment_crosses_triangle(&t1[i], &t1[(i + 1) % 3], t2) || segment_crosses_triangle(&t2[i], &t2[(i + 1) % 3], t1) {
            return true;
        }
    }
    triangle_triangle_distance_sq(t1, t2) <= 0.0
}
