//! Lagged, mollified Coulomb friction.
//!
//! Normal force magnitudes, tangent bases and closest-point weights are
//! frozen at the start of a step. The dissipative potential of a pair is
//! `μ λ m(‖u‖)` with `u` the tangential relative displacement over the step.

use nalgebra::{SMatrix, Vector2};
use rayon::prelude::*;

use super::{barrier_derivatives_in_d, ContactPair, PairDerivatives, PairGeometry};
use crate::body::{AffineBody, BodyCoords};
use crate::error::Result;
use crate::math::Vec3;

pub type TangentBasis = SMatrix<f64, 3, 2>;

#[derive(Clone, Debug)]
pub struct FrictionDatum {
    pub pair: ContactPair,
    /// Lagged normal force magnitude, in incremental-potential units.
    pub lambda: f64,
    pub tangent_basis: TangentBasis,
    /// Closest-point weights of the four pair points.
    pub weights: [f64; 4],
    /// Pair point positions at the start of the step.
    pub prev_points: [Vec3; 4],
}

/// `m(y) = y²(1 − y/(3ε))/ε` below `ε`, `y − ε/3` above; C¹ with `m(0) = 0`.
pub fn mollified_norm(y: f64, eps: f64) -> f64 {
    if y < eps {
        y * y * (1.0 - y / (3.0 * eps)) / eps
    } else {
        y - eps / 3.0
    }
}

/// `m'(y)`.
pub fn mollified_norm_d1(y: f64, eps: f64) -> f64 {
    if y < eps {
        y * (2.0 - y / eps) / eps
    } else {
        1.0
    }
}

fn orthonormal_tangents(n: &Vec3) -> TangentBasis {
    let helper = if n.x.abs() < 0.6 { Vec3::x() } else if n.y.abs() < 0.6 { Vec3::y() } else { Vec3::z() };
    let t0 = n.cross(&helper).normalize();
    let t1 = n.cross(&t0);
    TangentBasis::from_columns(&[t0, t1])
}

/// Active pairs (closer than `d̂` at `qs_prev`) with their lagged data.
pub fn friction_precompute(
    bodies: &[AffineBody],
    qs_prev: &[BodyCoords],
    candidates: &[ContactPair],
    kappa: f64,
    d_hat: f64,
    mu: f64,
) -> Result<Vec<FrictionDatum>> {
    if mu <= 0.0 {
        return Ok(Vec::new());
    }
    let data: Vec<Option<FrictionDatum>> = candidates
        .par_iter()
        .map(|pair| {
            let g = PairGeometry::new(pair, bodies, qs_prev);
            let r = g.distance()?;
            if r.d_sq >= d_hat * d_hat {
                return Ok(None);
            }
            let (_, b1, _) = barrier_derivatives_in_d(r.d_sq, d_hat)?;
            let lambda = -kappa * r.ee_parallel_mollifier * b1;
            if lambda <= 0.0 {
                return Ok(None);
            }
            let dir: Vec3 = (0..4).map(|i| g.points[i] * r.weights[i]).sum();
            let norm = dir.norm();
            if norm <= 0.0 {
                return Ok(None);
            }
            Ok(Some(FrictionDatum {
                pair: *pair,
                lambda,
                tangent_basis: orthonormal_tangents(&(dir / norm)),
                weights: r.weights,
                prev_points: g.points,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(data.into_iter().flatten().collect())
}

impl FrictionDatum {
    /// Linear map from stacked body coordinates to the tangential displacement.
    fn tangent_map(&self, g: &PairGeometry) -> SMatrix<f64, 2, 24> {
        let mut gamma = SMatrix::<f64, 3, 12>::zeros();
        for i in 0..4 {
            for k in 0..3 {
                gamma[(k, 3 * i + k)] = self.weights[i];
            }
        }
        self.tangent_basis.transpose() * gamma * g.point_map()
    }

    /// Tangential relative displacement since the start of the step.
    pub fn tangential_displacement(&self, bodies: &[AffineBody], qs: &[BodyCoords]) -> Vector2<f64> {
        let g = PairGeometry::new(&self.pair, bodies, qs);
        let rel: Vec3 = (0..4).map(|i| (g.points[i] - self.prev_points[i]) * self.weights[i]).sum();
        self.tangent_basis.transpose() * rel
    }

    pub fn energy(&self, bodies: &[AffineBody], qs: &[BodyCoords], mu: f64, eps: f64) -> f64 {
        mu * self.lambda * mollified_norm(self.tangential_displacement(bodies, qs).norm(), eps)
    }

    /// Energy, gradient and Hessian in the stacked coordinates of the pair's
    /// two bodies. The Hessian is PSD without projection.
    pub fn derivatives(&self, bodies: &[AffineBody], qs: &[BodyCoords], mu: f64, eps: f64) -> PairDerivatives {
        let g = PairGeometry::new(&self.pair, bodies, qs);
        let map = self.tangent_map(&g);
        let u = self.tangential_displacement(bodies, qs);
        let y = u.norm();
        let scale = mu * self.lambda;
        let hu = if y < eps {
            // (m'/y) I + (m'' − m'/y) ûûᵀ with m'/y = (2 − y/ε)/ε and m'' − m'/y = −y/ε²
            let mut h = nalgebra::Matrix2::identity() * ((2.0 - y / eps) / eps);
            if y > 0.0 {
                h -= u * u.transpose() / (eps * eps * y);
            }
            h
        } else {
            (nalgebra::Matrix2::identity() - u * u.transpose() / (y * y)) / y
        };
        let grad_u = if y > 0.0 { u * (mollified_norm_d1(y, eps) / y) } else { Vector2::zeros() };
        PairDerivatives {
            energy: scale * mollified_norm(y, eps),
            grad: map.transpose() * grad_u * scale,
            hess: map.transpose() * hu * map * scale,
        }
    }
}

/// `Σ μ λ m(‖u‖)` over the friction data, summed in order.
pub fn friction_energy(bodies: &[AffineBody], qs: &[BodyCoords], data: &[FrictionDatum], mu: f64, eps: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let e: Vec<f64> = data.par_iter().map(|d| d.energy(bodies, qs, mu, eps)).collect();
    e.iter().sum()
}
