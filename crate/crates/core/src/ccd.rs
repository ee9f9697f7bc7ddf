//! Additive continuous collision detection along linear trajectories.
//!
//! Affine coordinates enter world positions linearly, so a step `Δq` moves
//! every material point on a straight line `x + τ J(x̄) Δq`. Time of impact is
//! then bounded by conservative advancement on the four points of a pair.

use rayon::prelude::*;

use crate::body::{world_position, AffineBody, BodyCoords};
use crate::contact::{ContactPair, PairGeometry};
use crate::distance::{edge_edge_distance_sq, point_triangle_distance_sq};
use crate::error::{Error, Result};
use crate::math::{Vec12, Vec3};

/// Default fraction of the initial distance kept as a gap.
pub const DEFAULT_SLACK: f64 = 0.1;
pub const MAX_ITERATIONS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryKind {
    PointTriangle,
    EdgeEdge,
}

/// Four points moving linearly from `x` to `x + dx` over `t ∈ [0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct CcdQuery {
    pub kind: QueryKind,
    pub x: [Vec3; 4],
    pub dx: [Vec3; 4],
    pub slack: f64,
    pub t_max: f64,
}

impl CcdQuery {
    pub fn distance_sq_at(&self, t: f64) -> f64 {
        let p: [Vec3; 4] = std::array::from_fn(|i| self.x[i] + self.dx[i] * t);
        distance_sq(self.kind, &p)
    }
}

fn distance_sq(kind: QueryKind, p: &[Vec3; 4]) -> f64 {
    let r = match kind {
        QueryKind::PointTriangle => point_triangle_distance_sq(&p[0], &p[1], &p[2], &p[3]),
        QueryKind::EdgeEdge => edge_edge_distance_sq(&p[0], &p[1], &p[2], &p[3], 0.0),
    };
    // A primitive collapsing to zero size mid-step is measured by its vertices.
    r.map(|r| r.d_sq).unwrap_or_else(|_| {
        let (a, b) = match kind {
            QueryKind::PointTriangle => (0..1, 1..4),
            QueryKind::EdgeEdge => (0..2, 2..4),
        };
        a.flat_map(|i| b.clone().map(move |j| (p[i] - p[j]).norm_squared()))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Largest `t ≤ t_max` such that the distance stays at least `slack · d₀`
/// over `[0, t]`.
pub fn accd_toi(query: &CcdQuery) -> Result<f64> {
    let d0 = query.distance_sq_at(0.0).sqrt();
    if d0 <= 0.0 || d0.is_nan() {
        return Err(Error::CcdContract(d0));
    }
    let mean: Vec3 = query.dx.iter().sum::<Vec3>() / 4.0;
    let rel: [Vec3; 4] = query.dx.map(|d| d - mean);
    let n = rel.map(|d| d.norm());
    let lp = match query.kind {
        QueryKind::PointTriangle => n[0] + n[1].max(n[2]).max(n[3]),
        QueryKind::EdgeEdge => n[0].max(n[1]) + n[2].max(n[3]),
    };
    if lp <= 0.0 {
        return Ok(query.t_max);
    }
    let gap = query.slack * d0;
    let mut t = 0.0;
    let mut d = d0;
    for _ in 0..MAX_ITERATIONS {
        let inc = (d - gap) / lp;
        if inc <= 0.0 {
            break;
        }
        if t + inc >= query.t_max {
            return Ok(query.t_max);
        }
        t += inc;
        if inc * lp < 1e-12 * d0 {
            break;
        }
        d = query.distance_sq_at(t).sqrt();
    }
    Ok(t)
}

/// Builds the linear query of a pair for the step `Δq` (zero for static bodies).
pub fn pair_query(pair: &ContactPair, bodies: &[AffineBody], qs: &[BodyCoords], dqs: &[Vec12], slack: f64) -> CcdQuery {
    let g = PairGeometry::new(pair, bodies, qs);
    let body = [pair.body_a, pair.body_b];
    let dx = std::array::from_fn(|i| {
        let b = body[g.side[i]];
        displacement(&g.rest[i], &dqs[b])
    });
    CcdQuery {
        kind: if g.is_edge_edge() { QueryKind::EdgeEdge } else { QueryKind::PointTriangle },
        x: g.points,
        dx,
        slack,
        t_max: 1.0,
    }
}

/// `ΔA x̄ + Δp`.
pub fn displacement(x_bar: &Vec3, dq: &Vec12) -> Vec3 {
    world_position(&BodyCoords(*dq), x_bar)
}

/// Largest certified step fraction for `Δq` over the candidate pairs.
pub fn step_filter(bodies: &[AffineBody], qs: &[BodyCoords], dqs: &[Vec12], candidates: &[ContactPair], slack: f64) -> Result<f64> {
    candidates
        .par_iter()
        .map(|p| accd_toi(&pair_query(p, bodies, qs, dqs, slack)))
        .try_reduce(|| 1.0, |a, b| Ok(a.min(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::broad_phase;
    use crate::intersect::triangle_triangle_distance_sq;
    use crate::mesh::box_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn sampled_first_contact(q: &CcdQuery, samples: usize, threshold: f64) -> f64 {
        (0..=samples)
            .map(|k| k as f64 / samples as f64 * q.t_max)
            .find(|&t| q.distance_sq_at(t).sqrt() <= threshold)
            .unwrap_or(f64::INFINITY)
    }

    fn tri_query(dp: Vec3) -> CcdQuery {
        CcdQuery {
            kind: QueryKind::PointTriangle,
            x: [v(0.2, 0.2, 1.0), v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)],
            dx: [dp, Vec3::zeros(), Vec3::zeros(), Vec3::zeros()],
            slack: 0.1,
            t_max: 1.0,
        }
    }

    #[test]
    fn vertex_falling_onto_triangle() {
        let q = tri_query(v(0.0, 0.0, -2.0));
        let t = accd_toi(&q).unwrap();
        assert!(t <= 0.5);
        assert!(q.distance_sq_at(t).sqrt() >= 0.1 * (1.0 - 1e-9));
        assert!(t > 0.4);
        assert!(sampled_first_contact(&q, 100_000, 0.0) > t);
    }

    #[test]
    fn separating_motion_returns_t_max() {
        assert_eq!(accd_toi(&tri_query(v(0.0, 0.0, 2.0))).unwrap(), 1.0);
        assert_eq!(accd_toi(&tri_query(Vec3::zeros())).unwrap(), 1.0);
    }

    #[test]
    fn zero_initial_distance_is_a_contract_violation() {
        let mut q = tri_query(v(0.0, 0.0, -1.0));
        q.x[0] = v(0.2, 0.2, 0.0);
        assert!(matches!(accd_toi(&q), Err(Error::CcdContract(_))));
    }

    #[test]
    fn parallel_edges_face_on() {
        let q = CcdQuery {
            kind: QueryKind::EdgeEdge,
            x: [v(0.0, 0.0, 0.5), v(1.0, 0.0, 0.5), v(0.0, 0.0, -0.5), v(1.0, 0.0, -0.5)],
            dx: [v(0.0, 0.0, -1.0), v(0.0, 0.0, -1.0), v(0.0, 0.0, 1.0), v(0.0, 0.0, 1.0)],
            slack: 0.1,
            t_max: 1.0,
        };
        let t = accd_toi(&q).unwrap();
        assert!(t <= 0.5 && t > 0.4);
        assert!(q.distance_sq_at(t).sqrt() >= 0.1 * (1.0 - 1e-9));
        assert!(sampled_first_contact(&q, 100_000, 0.0) > t);
    }

    fn random_query(rng: &mut ChaCha8Rng) -> CcdQuery {
        let mut r = || v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let kind = if r().x > 0.0 { QueryKind::PointTriangle } else { QueryKind::EdgeEdge };
        CcdQuery {
            kind,
            x: [r(), r(), r(), r()],
            dx: [r() * 2.0, r() * 2.0, r() * 2.0, r() * 2.0],
            slack: 0.1,
            t_max: 1.0,
        }
    }

    #[test]
    fn random_queries_are_sound_and_monotone_in_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let q = random_query(&mut rng);
            let t = accd_toi(&q).unwrap();
            let d0 = q.distance_sq_at(0.0).sqrt();
            let steps = 2000;
            for k in 0..=steps {
                let tau = t * k as f64 / steps as f64;
                assert!(q.distance_sq_at(tau).sqrt() >= q.slack * d0 * (1.0 - 1e-9));
            }
            let mut tighter = q;
            tighter.slack = 0.05;
            assert!(accd_toi(&tighter).unwrap() >= t - 1e-12);
        }
    }

    #[test]
    fn trajectories_are_linear_in_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let q = BodyCoords(Vec12::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let dq = Vec12::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let x_bar = v(rng.random(), rng.random(), rng.random());
            let tau: f64 = rng.random();
            let direct = world_position(&BodyCoords(q.0 + dq * tau), &x_bar);
            let linear = world_position(&q, &x_bar) + displacement(&x_bar, &dq) * tau;
            assert!((direct - linear).norm() < 1e-14);
        }
    }

    #[test]
    fn step_filter_keeps_cubes_apart() {
        let cube = box_mesh(Vec3::repeat(1.0));
        let bodies = vec![
            AffineBody::new_dynamic("a", cube.clone(), 1.0, 1.0).unwrap(),
            AffineBody::new_dynamic("b", cube, 1.0, 1.0).unwrap(),
        ];
        let rot = *nalgebra::Rotation3::from_euler_angles(0.1, 0.2, 0.3).matrix();
        let qs = vec![BodyCoords::identity(), BodyCoords::from_parts(&v(0.1, 0.05, 1.3), &rot)];
        let mut dqs = vec![Vec12::zeros(); 2];
        dqs[0][2] = 0.5;
        dqs[1][2] = -0.5;
        assert_eq!(step_filter(&bodies, &qs, &dqs, &[], 0.1).unwrap(), 1.0);
        let end: Vec<BodyCoords> = qs.iter().zip(&dqs).map(|(q, d)| BodyCoords(q.0 + d)).collect();
        let (set, _) = broad_phase(&bodies, &qs, &end, 1e-3);
        let alpha = step_filter(&bodies, &qs, &dqs, &set.pairs, 0.1).unwrap();
        assert!(alpha > 0.0 && alpha < 1.0);
        let after: Vec<BodyCoords> = qs.iter().zip(&dqs).map(|(q, d)| BodyCoords(q.0 + d * alpha)).collect();
        let tris = |b: usize| -> Vec<[Vec3; 3]> {
            let m = &bodies[b].mesh;
            (0..m.triangles.len()).map(|t| m.triangle(t).map(|x| world_position(&after[b], &x))).collect()
        };
        let min = tris(0)
            .iter()
            .flat_map(|a| tris(1).into_iter().map(move |b| triangle_triangle_distance_sq(a, &b)))
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
    }
}
