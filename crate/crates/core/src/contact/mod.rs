//! Barrier contact between affine bodies: candidate pairs, the clamped log
//! barrier and per-pair derivatives in body coordinates.

pub mod broad_phase;
pub mod friction;

use nalgebra::SMatrix;
use rayon::prelude::*;

use crate::autodiff::Dual2;
use crate::body::{jacobian, world_position, AffineBody, BodyCoords};
use crate::distance::{
    edge_edge_distance_sq, mollifier_dual, mollifier_threshold, point_triangle_distance_sq, region_dist_sq_dual,
    DistanceResult,
};
use crate::error::{Error, Result};
use crate::math::{project_psd, Mat12, Mat24, Vec12, Vec24, Vec3};

pub use broad_phase::{broad_phase, BroadPhaseStats, CandidateSet};
pub use friction::{friction_energy, friction_precompute, FrictionDatum};

/// Primitive pairing. `VertexFace` has the vertex on `body_a`, `FaceVertex`
/// the face on `body_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairKind {
    VertexFace,
    FaceVertex,
    EdgeEdge,
}

/// An inter-body primitive pair, canonically ordered with `body_a < body_b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContactPair {
    pub body_a: usize,
    pub body_b: usize,
    pub kind: PairKind,
    pub prim_a: usize,
    pub prim_b: usize,
}

fn barrier_in_d(d: f64, d_hat: f64) -> (f64, f64, f64) {
    if d >= d_hat {
        return (0.0, 0.0, 0.0);
    }
    let r = d - d_hat;
    let l = (d / d_hat).ln();
    let b = -r * r * l;
    let b1 = -2.0 * r * l - r * r / d;
    let b2 = -2.0 * l - 4.0 * r / d + r * r / (d * d);
    (b, b1, b2)
}

fn check_positive(d_sq: f64) -> Result<f64> {
    if d_sq <= 0.0 || d_sq.is_nan() {
        return Err(Error::Intersection(d_sq));
    }
    Ok(d_sq.sqrt())
}

/// `B = −(d − d̂)² ln(d/d̂)` for `d < d̂`, zero beyond, taking `d²`.
pub fn barrier(d_sq: f64, d_hat: f64) -> Result<f64> {
    let d = check_positive(d_sq)?;
    Ok(barrier_in_d(d, d_hat).0)
}

/// First derivative of [`barrier`] with respect to `d²`.
pub fn barrier_d1(d_sq: f64, d_hat: f64) -> Result<f64> {
    Ok(barrier_sq_derivatives(d_sq, d_hat)?.1)
}

/// Second derivative of [`barrier`] with respect to `d²`.
pub fn barrier_d2(d_sq: f64, d_hat: f64) -> Result<f64> {
    Ok(barrier_sq_derivatives(d_sq, d_hat)?.2)
}

/// Barrier value and derivatives with respect to `d`.
pub fn barrier_derivatives_in_d(d_sq: f64, d_hat: f64) -> Result<(f64, f64, f64)> {
    let d = check_positive(d_sq)?;
    Ok(barrier_in_d(d, d_hat))
}

/// Barrier value and its first two derivatives with respect to `d²`.
pub fn barrier_sq_derivatives(d_sq: f64, d_hat: f64) -> Result<(f64, f64, f64)> {
    let d = check_positive(d_sq)?;
    let (b, b1, b2) = barrier_in_d(d, d_hat);
    Ok((b, b1 / (2.0 * d), (b2 - b1 / d) / (4.0 * d_sq)))
}

/// World positions, rest positions and owning side (0 for `body_a`, 1 for
/// `body_b`) of the four points of a pair, in distance-kernel order.
#[derive(Clone, Copy, Debug)]
pub struct PairGeometry {
    pub points: [Vec3; 4],
    pub rest: [Vec3; 4],
    pub side: [usize; 4],
    /// Parallel-edge mollifier threshold; zero for point–triangle pairs.
    pub eps_x: f64,
}

impl PairGeometry {
    pub fn new(pair: &ContactPair, bodies: &[AffineBody], qs: &[BodyCoords]) -> Self {
        let ma = &bodies[pair.body_a].mesh;
        let mb = &bodies[pair.body_b].mesh;
        let (rest, side, eps_x) = match pair.kind {
            PairKind::VertexFace => {
                let t = mb.triangle(pair.prim_b);
                ([ma.vertices[pair.prim_a], t[0], t[1], t[2]], [0, 1, 1, 1], 0.0)
            }
            PairKind::FaceVertex => {
                let t = ma.triangle(pair.prim_a);
                ([mb.vertices[pair.prim_b], t[0], t[1], t[2]], [1, 0, 0, 0], 0.0)
            }
            PairKind::EdgeEdge => {
                let [a0, a1] = ma.edge(pair.prim_a);
                let [b0, b1] = mb.edge(pair.prim_b);
                ([a0, a1, b0, b1], [0, 0, 1, 1], mollifier_threshold(&a0, &a1, &b0, &b1))
            }
        };
        let body = [pair.body_a, pair.body_b];
        let points = std::array::from_fn(|i| world_position(&qs[body[side[i]]], &rest[i]));
        Self {
            points,
            rest,
            side,
            eps_x,
        }
    }

    pub fn is_edge_edge(&self) -> bool {
        self.eps_x > 0.0
    }

    pub fn distance(&self) -> Result<DistanceResult> {
        let [x0, x1, x2, x3] = &self.points;
        if self.is_edge_edge() {
            edge_edge_distance_sq(x0, x1, x2, x3, self.eps_x)
        } else {
            point_triangle_distance_sq(x0, x1, x2, x3)
        }
    }

    /// The 12×24 map from the two bodies' stacked coordinates to the
    /// stacked point positions.
    pub fn point_map(&self) -> SMatrix<f64, 12, 24> {
        let mut m = SMatrix::<f64, 12, 24>::zeros();
        for i in 0..4 {
            m.fixed_view_mut::<3, 12>(3 * i, 12 * self.side[i]).copy_from(&jacobian(&self.rest[i]));
        }
        m
    }

    /// `Mᵀ g` and `Mᵀ H M` for the [`point_map`](Self::point_map) `M`,
    /// using its sparsity.
    pub fn to_body_space(&self, g: &Vec12, h: &Mat12) -> (Vec24, Mat24) {
        let idx = |side: usize, r: usize, k: usize| 12 * side + if k == 0 { r } else { 3 + 3 * r + k - 1 };
        let w: [[f64; 4]; 4] = std::array::from_fn(|i| [1.0, self.rest[i].x, self.rest[i].y, self.rest[i].z]);
        let mut grad = Vec24::zeros();
        let mut hess = Mat24::zeros();
        for i in 0..4 {
            for r in 0..3 {
                for k in 0..4 {
                    grad[idx(self.side[i], r, k)] += w[i][k] * g[3 * i + r];
                }
            }
            for j in 0..4 {
                for r in 0..3 {
                    for s in 0..3 {
                        let v = h[(3 * i + r, 3 * j + s)];
                        for k in 0..4 {
                            let wk = w[i][k] * v;
                            let row = idx(self.side[i], r, k);
                            for l in 0..4 {
                                hess[(row, idx(self.side[j], s, l))] += wk * w[j][l];
                            }
                        }
                    }
                }
            }
        }
        (grad, hess)
    }
}

/// Energy, gradient and Hessian of one pair in the stacked coordinates of
/// `(body_a, body_b)`.
#[derive(Clone, Debug)]
pub struct PairDerivatives {
    pub energy: f64,
    pub grad: Vec24,
    pub hess: Mat24,
}

/// `κ e B(d²)` for one pair, with `e` the parallel-edge mollifier.
pub fn pair_energy(pair: &ContactPair, bodies: &[AffineBody], qs: &[BodyCoords], kappa: f64, d_hat: f64) -> Result<f64> {
    let g = PairGeometry::new(pair, bodies, qs);
    let r = g.distance()?;
    let b = barrier(r.d_sq, d_hat)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    Ok(kappa * r.ee_parallel_mollifier * b)
}

/// Pair derivatives, or `None` when the pair is at or beyond `d̂`. The
/// point-space Hessian is optionally projected to PSD before mapping to body
/// coordinates, which keeps the body-space Hessian PSD.
pub fn pair_derivatives(
    pair: &ContactPair,
    bodies: &[AffineBody],
    qs: &[BodyCoords],
    kappa: f64,
    d_hat: f64,
    project: bool,
) -> Result<Option<PairDerivatives>> {
    let g = PairGeometry::new(pair, bodies, qs);
    let r = g.distance()?;
    let (b, db, d2b) = barrier_sq_derivatives(r.d_sq, d_hat)?;
    if b == 0.0 && db == 0.0 {
        return Ok(None);
    }
    let d_sq = region_dist_sq_dual(&g.points, r.region);
    let mut e: Dual2<12> = d_sq.chain(b, db, d2b);
    if g.is_edge_edge() && r.ee_parallel_mollifier < 1.0 {
        e = e * mollifier_dual(&g.points, g.eps_x);
    }
    let e = e.scale(kappa);
    let h: Mat12 = if project { project_psd(&e.h) } else { (e.h + e.h.transpose()) * 0.5 };
    let (grad, hess) = g.to_body_space(&e.g, &h);
    Ok(Some(PairDerivatives { energy: e.v, grad, hess }))
}

/// `κ Σ e B` over the candidate set, summed in candidate order.
pub fn contact_energy(bodies: &[AffineBody], qs: &[BodyCoords], candidates: &[ContactPair], kappa: f64, d_hat: f64) -> Result<f64> {
    let per_pair: Vec<f64> = candidates
        .par_iter()
        .map(|p| pair_energy(p, bodies, qs, kappa, d_hat))
        .collect::<Result<_>>()?;
    Ok(per_pair.iter().sum())
}

/// Smallest unsigned distance over the candidate set.
pub fn min_distance(bodies: &[AffineBody], qs: &[BodyCoords], candidates: &[ContactPair]) -> Option<f64> {
    candidates
        .par_iter()
        .map(|p| PairGeometry::new(p, bodies, qs).distance().map(|r| r.d_sq).unwrap_or(f64::INFINITY))
        .min_by(|a, b| a.total_cmp(b))
        .map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{min_eigenvalue, Mat3};
    use crate::mesh::{box_mesh, SurfaceMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const D_HAT: f64 = 1e-3;

    /// Direct transcription of the clamped barrier in `d`.
    fn oracle(d: f64, d_hat: f64) -> f64 {
        if d < d_hat {
            -(d - d_hat).powi(2) * (d / d_hat).ln()
        } else {
            0.0
        }
    }

    #[test]
    fn barrier_examples() {
        assert_eq!(barrier(D_HAT * D_HAT, D_HAT).unwrap(), 0.0);
        let half = barrier(0.25 * D_HAT * D_HAT, D_HAT).unwrap();
        assert!((half - 1.7329e-7).abs() < 1e-11);
        assert!((half - D_HAT * D_HAT / 4.0 * 2f64.ln()).abs() < 1e-20);
        assert!(barrier(1e-30, D_HAT).unwrap() > barrier(1e-20, D_HAT).unwrap());
        assert!(matches!(barrier(0.0, D_HAT), Err(Error::Intersection(_))));
        assert!(matches!(barrier(-1.0, D_HAT), Err(Error::Intersection(_))));
    }

    #[test]
    fn barrier_matches_oracle_and_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d = rng.random_range(1e-6..1.5e-3);
            let s = d * d;
            assert!((barrier(s, D_HAT).unwrap() - oracle(d, D_HAT)).abs() <= 1e-14 * oracle(d, D_HAT).abs().max(1e-20));
            let h = 1e-6 * s;
            let fd1 = (barrier(s + h, D_HAT).unwrap() - barrier(s - h, D_HAT).unwrap()) / (2.0 * h);
            let fd2 = (barrier_d1(s + h, D_HAT).unwrap() - barrier_d1(s - h, D_HAT).unwrap()) / (2.0 * h);
            let (_, d1, d2) = barrier_sq_derivatives(s, D_HAT).unwrap();
            if (d - D_HAT).abs() > 1e-4 * D_HAT {
                assert!((fd1 - d1).abs() <= 1e-5 * d1.abs().max(1e-12), "{d} {fd1} {d1}");
                assert!((fd2 - d2).abs() <= 1e-4 * d2.abs().max(1e-6), "{d} {fd2} {d2}");
            }
        }
    }

    #[test]
    fn barrier_is_c2_at_clamp() {
        for eps in [1e-4, 1e-6, 1e-8] {
            let d = D_HAT * (1.0 - eps);
            let (b, b1, b2) = barrier_derivatives_in_d(d * d, D_HAT).unwrap();
            assert!(b.abs() < 1e-6 * eps);
            assert!(b1.abs() < 1e-2 * eps.sqrt());
            assert!(b2.abs() < 10.0 * eps);
        }
    }

    fn vertex_above_triangle(gap: f64) -> (Vec<AffineBody>, Vec<BodyCoords>) {
        let point = SurfaceMesh {
            vertices: vec![Vec3::zeros()],
            triangles: vec![],
            edges: vec![],
        };
        let tri = SurfaceMesh::new(
            vec![Vec3::new(-1.0, -1.0, 0.0), Vec3::new(2.0, -1.0, 0.0), Vec3::new(-1.0, 2.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bodies = vec![AffineBody::new_static("p", point), AffineBody::new_static("t", tri)];
        let qs = vec![BodyCoords::from_parts(&Vec3::new(0.0, 0.0, gap), &Mat3::identity()), BodyCoords::identity()];
        (bodies, qs)
    }

    #[test]
    fn single_pair_energy() {
        let pair = ContactPair {
            body_a: 0,
            body_b: 1,
            kind: PairKind::VertexFace,
            prim_a: 0,
            prim_b: 0,
        };
        let kappa = 1e4;
        let (bodies, qs) = vertex_above_triangle(D_HAT / 2.0);
        let e = contact_energy(&bodies, &qs, &[pair], kappa, D_HAT).unwrap();
        assert!((e - kappa * D_HAT * D_HAT / 4.0 * 2f64.ln()).abs() < 1e-15);
        let (bodies, qs) = vertex_above_triangle(2.0 * D_HAT);
        assert_eq!(contact_energy(&bodies, &qs, &[pair], kappa, D_HAT).unwrap(), 0.0);
        assert!(pair_derivatives(&pair, &bodies, &qs, kappa, D_HAT, true).unwrap().is_none());
    }

    fn random_rotation(rng: &mut ChaCha8Rng, scale: f64) -> Mat3 {
        *nalgebra::Rotation3::from_scaled_axis(Vec3::new(rng.random(), rng.random(), rng.random()) * scale).matrix()
    }

    /// Two unit cubes face to face with a small random gap and a slight
    /// random affine perturbation; every near pair of the two is returned.
    fn near_contact_state(rng: &mut ChaCha8Rng) -> (Vec<AffineBody>, Vec<BodyCoords>, Vec<ContactPair>) {
        let cube = box_mesh(Vec3::repeat(1.0));
        let bodies = vec![
            AffineBody::new_dynamic("a", cube.clone(), 1.0, 1.0).unwrap(),
            AffineBody::new_dynamic("b", cube, 1.0, 1.0).unwrap(),
        ];
        let gap = rng.random_range(0.2..0.9) * D_HAT;
        let center = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 1.0 + gap);
        let qb = BodyCoords::from_parts(&center, &random_rotation(rng, 5e-5));
        let qs = vec![BodyCoords::identity(), qb];
        let (set, _) = broad_phase(&bodies, &qs, &qs, D_HAT);
        let pairs = set
            .pairs
            .into_iter()
            .filter(|p| PairGeometry::new(p, &bodies, &qs).distance().unwrap().d_sq < D_HAT * D_HAT)
            .collect();
        (bodies, qs, pairs)
    }

    fn stacked(qs: &[BodyCoords]) -> Vec24 {
        let mut x = Vec24::zeros();
        x.fixed_rows_mut::<12>(0).copy_from(&qs[0].0);
        x.fixed_rows_mut::<12>(12).copy_from(&qs[1].0);
        x
    }

    fn unstack(x: &Vec24) -> Vec<BodyCoords> {
        vec![
            BodyCoords(x.fixed_rows::<12>(0).into_owned()),
            BodyCoords(x.fixed_rows::<12>(12).into_owned()),
        ]
    }

    #[test]
    fn pair_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kappa = 1e4;
        let mut checked = 0;
        for _ in 0..20 {
            let (bodies, qs, pairs) = near_contact_state(&mut rng);
            for pair in pairs.iter().take(30) {
                let Some(d) = pair_derivatives(pair, &bodies, &qs, kappa, D_HAT, false).unwrap() else {
                    continue;
                };
                let x = stacked(&qs);
                let h = 1e-9;
                let f = |x: &Vec24| pair_energy(pair, &bodies, &unstack(x), kappa, D_HAT).unwrap();
                let grad_at = |x: &Vec24| {
                    pair_derivatives(pair, &bodies, &unstack(x), kappa, D_HAT, false)
                        .unwrap()
                        .map(|d| d.grad)
                        .unwrap_or_else(Vec24::zeros)
                };
                let mut fd_g = Vec24::zeros();
                let mut fd_h = Mat24::zeros();
                for k in 0..24 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    fd_g[k] = (f(&xp) - f(&xm)) / (2.0 * h);
                    fd_h.set_column(k, &((grad_at(&xp) - grad_at(&xm)) / (2.0 * h)));
                }
                assert!((fd_g - d.grad).norm() <= 1e-5 * d.grad.norm(), "{:e} vs {:e}", (fd_g - d.grad).norm(), d.grad.norm());
                assert!((fd_h - d.hess).norm() <= 1e-4 * d.hess.norm(), "{:e} vs {:e}", (fd_h - d.hess).norm(), d.hess.norm());
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn projected_hessians_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let (bodies, qs, pairs) = near_contact_state(&mut rng);
            for pair in &pairs {
                if let Some(d) = pair_derivatives(pair, &bodies, &qs, 1e4, D_HAT, true).unwrap() {
                    assert!(min_eigenvalue(&d.hess) >= -1e-10 * d.hess.norm());
                }
            }
        }
    }

    #[test]
    fn energy_decreases_with_distance() {
        let pair = ContactPair {
            body_a: 0,
            body_b: 1,
            kind: PairKind::VertexFace,
            prim_a: 0,
            prim_b: 0,
        };
        let mut last = f64::INFINITY;
        for k in 1..100 {
            let (bodies, qs) = vertex_above_triangle(k as f64 * D_HAT / 90.0);
            let e = contact_energy(&bodies, &qs, &[pair], 1.0, D_HAT).unwrap();
            assert!(e <= last);
            last = e;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn far_pairs_leave_energy_bitwise_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (bodies, qs, _) = near_contact_state(&mut rng);
        let (all, _) = broad_phase(&bodies, &qs, &qs, D_HAT);
        let near: Vec<ContactPair> = all
            .pairs
            .iter()
            .copied()
            .filter(|p| PairGeometry::new(p, &bodies, &qs).distance().unwrap().d_sq < D_HAT * D_HAT)
            .collect();
        assert!(near.len() < all.pairs.len());
        let e_all: f64 = all.pairs.iter().map(|p| pair_energy(p, &bodies, &qs, 1e4, D_HAT).unwrap()).sum();
        let e_near: f64 = near.iter().map(|p| pair_energy(p, &bodies, &qs, 1e4, D_HAT).unwrap()).sum();
        assert_eq!(e_all.to_bits(), e_near.to_bits());
    }

    #[test]
    fn structured_map_matches_dense_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (bodies, qs, pairs) = near_contact_state(&mut rng);
        let g = Vec12::from_fn(|i, _| (i as f64 * 0.37).sin());
        let h = Mat12::from_fn(|i, j| ((i * 12 + j) as f64 * 0.11).cos());
        for pair in pairs.iter().take(20) {
            let geo = PairGeometry::new(pair, &bodies, &qs);
            let m = geo.point_map();
            let (gb, hb) = geo.to_body_space(&g, &h);
            assert!((gb - m.transpose() * g).amax() < 1e-12);
            assert!((hb - m.transpose() * h * m).amax() < 1e-12);
        }
    }
}
