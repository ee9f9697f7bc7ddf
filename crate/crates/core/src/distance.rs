//! Unsigned squared-distance kernels for point–triangle and edge–edge pairs.
//!
//! Every query is first classified into the closest-feature region using
//! plain floating point. The squared distance is then evaluated with the
//! closed-form expression of that region (point–point, point–line,
//! point–plane or line–line), written generically so the same expression
//! yields exact gradients and Hessians when evaluated on dual numbers.

use crate::autodiff::{dual_points, Dual2, Real, V3};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Closest-feature classification of a point–triangle query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointTriangleRegion {
    /// Closest to triangle vertex `k`.
    Vertex(u8),
    /// Closest to the interior of edge `(t_k, t_{k+1 mod 3})`.
    Edge(u8),
    Interior,
}

/// Closest-feature classification of an edge–edge query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeEdgeRegion {
    /// Endpoint `i` of edge a against endpoint `j` of edge b.
    Endpoints(u8, u8),
    /// Endpoint `i` of edge a against the interior of edge b.
    PointA(u8),
    /// Endpoint `j` of edge b against the interior of edge a.
    PointB(u8),
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    PointTriangle(PointTriangleRegion),
    EdgeEdge(EdgeEdgeRegion),
}

#[derive(Clone, Copy, Debug)]
pub struct DistanceResult {
    pub d_sq: f64,
    pub region: Region,
    /// Near-parallel edge mollifier; 1 for point–triangle pairs.
    pub ee_parallel_mollifier: f64,
    /// Signed point weights `w` with `Σ wᵢ xᵢ` the vector from the closest
    /// point on the second primitive to the closest point on the first.
    pub weights: [f64; 4],
}

// Squared-distance expressions, generic over the scalar type.

fn point_point<T: Real>(p: &V3<T>, q: &V3<T>) -> T {
    p.sub(q).norm_sq()
}

fn point_line<T: Real>(p: &V3<T>, a: &V3<T>, b: &V3<T>) -> T {
    a.sub(p).cross(&b.sub(p)).norm_sq() / b.sub(a).norm_sq()
}

fn point_plane<T: Real>(p: &V3<T>, t0: &V3<T>, t1: &V3<T>, t2: &V3<T>) -> T {
    let n = t1.sub(t0).cross(&t2.sub(t0));
    let s = p.sub(t0).dot(&n);
    s * s / n.norm_sq()
}

fn line_line<T: Real>(a0: &V3<T>, a1: &V3<T>, b0: &V3<T>, b1: &V3<T>) -> T {
    let n = a1.sub(a0).cross(&b1.sub(b0));
    let s = b0.sub(a0).dot(&n);
    s * s / n.norm_sq()
}

/// Squared point–triangle distance using the expression of `region`.
/// Point order is `[p, t0, t1, t2]`.
pub fn point_triangle_region_dist_sq<T: Real>(x: &[V3<T>; 4], region: PointTriangleRegion) -> T {
    let [p, t0, t1, t2] = x;
    let t = [t0, t1, t2];
    match region {
        PointTriangleRegion::Vertex(k) => point_point(p, t[k as usize]),
        PointTriangleRegion::Edge(k) => point_line(p, t[k as usize], t[(k as usize + 1) % 3]),
        PointTriangleRegion::Interior => point_plane(p, t0, t1, t2),
    }
}

/// Squared edge–edge distance using the expression of `region`.
/// Point order is `[a0, a1, b0, b1]`.
pub fn edge_edge_region_dist_sq<T: Real>(x: &[V3<T>; 4], region: EdgeEdgeRegion) -> T {
    let [a0, a1, b0, b1] = x;
    let a = [a0, a1];
    let b = [b0, b1];
    match region {
        EdgeEdgeRegion::Endpoints(i, j) => point_point(a[i as usize], b[j as usize]),
        EdgeEdgeRegion::PointA(i) => point_line(a[i as usize], b0, b1),
        EdgeEdgeRegion::PointB(j) => point_line(b[j as usize], a0, a1),
        EdgeEdgeRegion::Interior => line_line(a0, a1, b0, b1),
    }
}

/// Activation threshold of the parallel-edge mollifier, from rest geometry.
pub fn mollifier_threshold(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    1e-3 * (a1 - a0).norm_squared() * (b1 - b0).norm_squared()
}

/// `e(c) = (c/ε)(2 − c/ε)` below `ε`, 1 above, with its first two derivatives.
pub fn mollifier(c: f64, eps_x: f64) -> (f64, f64, f64) {
    if c >= eps_x {
        (1.0, 0.0, 0.0)
    } else {
        let r = c / eps_x;
        (r * (2.0 - r), (2.0 - 2.0 * r) / eps_x, -2.0 / (eps_x * eps_x))
    }
}

fn to_v3(x: &[Vec3; 4]) -> [V3<f64>; 4] {
    x.map(|p| V3::from_vec3(&p))
}

/// Exact squared distance from `p` to the closed triangle `(t0, t1, t2)`.
pub fn point_triangle_distance_sq(p: &Vec3, t0: &Vec3, t1: &Vec3, t2: &Vec3) -> Result<DistanceResult> {
    let ab = t1 - t0;
    let ac = t2 - t0;
    if ab.cross(&ac).norm_squared() <= 0.0 {
        return Err(Error::DegenerateGeometry("triangle with zero area".into()));
    }
    let (region, beta) = classify_point_triangle(p, t0, t1, t2);
    let d_sq = point_triangle_region_dist_sq(&to_v3(&[*p, *t0, *t1, *t2]), region).max(0.0);
    Ok(DistanceResult {
        d_sq,
        region: Region::PointTriangle(region),
        ee_parallel_mollifier: 1.0,
        weights: [1.0, -beta[0], -beta[1], -beta[2]],
    })
}

/// Region and barycentric coordinates of the closest point on the triangle.
/// On exact ties lower-dimensional features win.
fn classify_point_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (PointTriangleRegion, [f64; 3]) {
    use PointTriangleRegion::*;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (Vertex(0), [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (Vertex(1), [0.0, 1.0, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (Vertex(2), [0.0, 0.0, 1.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (Edge(0), [1.0 - v, v, 0.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (Edge(2), [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (Edge(1), [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (Interior, [1.0 - v - w, v, w])
}

/// Exact squared distance between the closed segments `(a0, a1)` and
/// `(b0, b1)`; `eps_x` is the mollifier threshold (see [`mollifier_threshold`]).
pub fn edge_edge_distance_sq(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3, eps_x: f64) -> Result<DistanceResult> {
    let da = a1 - a0;
    let db = b1 - b0;
    let la = da.norm_squared();
    let lb = db.norm_squared();
    if la <= 0.0 || lb <= 0.0 {
        return Err(Error::DegenerateGeometry("edge with zero length".into()));
    }
    let (region, s, t) = classify_edge_edge(a0, &da, b0, &db);
    let d_sq = edge_edge_region_dist_sq(&to_v3(&[*a0, *a1, *b0, *b1]), region).max(0.0);
    let c = da.cross(&db).norm_squared();
    Ok(DistanceResult {
        d_sq,
        region: Region::EdgeEdge(region),
        ee_parallel_mollifier: mollifier(c, eps_x).0,
        weights: [1.0 - s, s, -(1.0 - t), -t],
    })
}

fn classify_edge_edge(a0: &Vec3, da: &Vec3, b0: &Vec3, db: &Vec3) -> (EdgeEdgeRegion, f64, f64) {
    use EdgeEdgeRegion::*;
    let r = a0 - b0;
    let a = da.norm_squared();
    let e = db.norm_squared();
    let f = db.dot(&r);
    let c = da.dot(&r);
    let b = da.dot(db);
    let denom = a * e - b * b;
    // Near-parallel pairs are resolved through their endpoint subcases.
    let mut s = if denom > 1e-12 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t <= 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t >= 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    let end = |x: f64| -> Option<u8> {
        if x <= 0.0 {
            Some(0)
        } else if x >= 1.0 {
            Some(1)
        } else {
            None
        }
    };
    let region = match (end(s), end(t)) {
        (Some(i), Some(j)) => Endpoints(i, j),
        (Some(i), None) => PointA(i),
        (None, Some(j)) => PointB(j),
        (None, None) => Interior,
    };
    (region, s, t)
}

/// Squared distance with exact gradient and Hessian with respect to the
/// twelve point coordinates, for a fixed region.
pub fn region_dist_sq_dual(x: &[Vec3; 4], region: Region) -> Dual2<12> {
    let d = dual_points(x);
    match region {
        Region::PointTriangle(r) => point_triangle_region_dist_sq(&d, r),
        Region::EdgeEdge(r) => edge_edge_region_dist_sq(&d, r),
    }
}

/// Parallel-edge mollifier as a dual number of the edge–edge point coordinates.
pub fn mollifier_dual(x: &[Vec3; 4], eps_x: f64) -> Dual2<12> {
    let d = dual_points(x);
    let c = d[1].sub(&d[0]).cross(&d[3].sub(&d[2])).norm_sq();
    let (e, de, d2e) = mollifier(c.v, eps_x);
    c.chain(e, de, d2e)
}
