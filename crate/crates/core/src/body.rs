//! Affine body state, generalized mass, the orthogonality potential and
//! generalized external forces.
//!
//! A body's configuration is `q = (p, a1, a2, a3)`, the translation followed
//! by the rows of the linear transform `A`, so a material point at rest
//! position `x̄` sits at `A x̄ + p = J(x̄) q` with the constant
//! `J(x̄) = [I₃, I₃ ⊗ x̄ᵀ]`.

use nalgebra::{Cholesky, SMatrix, U12};

use crate::error::{Error, Result};
use crate::math::{project_psd, Mat12, Mat3, Vec12, Vec3};
use crate::mesh::SurfaceMesh;

/// Default orthogonality stiffness.
pub const DEFAULT_KAPPA_ORTHO: f64 = 1e11;

/// Twelve generalized coordinates of an affine body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyCoords(pub Vec12);

impl BodyCoords {
    pub fn identity() -> Self {
        Self::from_parts(&Vec3::zeros(), &Mat3::identity())
    }

    pub fn from_parts(p: &Vec3, a: &Mat3) -> Self {
        let mut q = Vec12::zeros();
        q.fixed_rows_mut::<3>(0).copy_from(p);
        for i in 0..3 {
            q.fixed_rows_mut::<3>(3 + 3 * i).copy_from(&a.row(i).transpose());
        }
        Self(q)
    }

    pub fn translation(&self) -> Vec3 {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn row(&self, i: usize) -> Vec3 {
        self.0.fixed_rows::<3>(3 + 3 * i).into_owned()
    }

    pub fn linear(&self) -> Mat3 {
        Mat3::from_rows(&[self.row(0).transpose(), self.row(1).transpose(), self.row(2).transpose()])
    }
}

/// Configuration and generalized velocity of one body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyState {
    pub q: BodyCoords,
    pub q_dot: Vec12,
}

/// Density-weighted moments and the assembled generalized mass matrix.
#[derive(Clone, Debug)]
pub struct GeneralizedMass {
    pub mass: f64,
    pub first_moment: Vec3,
    pub second_moment: Mat3,
    pub assembled: Mat12,
    pub volume: f64,
    chol: Cholesky<f64, U12>,
}

#[derive(Clone, Copy, Debug)]
pub struct BodyMaterial {
    pub density: f64,
    pub kappa_ortho: f64,
    pub volume: f64,
}

impl BodyMaterial {
    /// Orthogonality energy scale `κν`.
    pub fn stiffness(&self) -> f64 {
        self.kappa_ortho * self.volume
    }
}

/// A body as seen by the solver: rest geometry plus inertial data.
/// Static bodies carry no mass and no degrees of freedom.
#[derive(Clone, Debug)]
pub struct AffineBody {
    pub name: String,
    pub mesh: SurfaceMesh,
    pub mass: Option<GeneralizedMass>,
    pub material: BodyMaterial,
}

impl AffineBody {
    pub fn new_dynamic(name: impl Into<String>, mesh: SurfaceMesh, density: f64, kappa_ortho: f64) -> Result<Self> {
        let mass = mass_matrix(&mesh, density)?;
        let material = BodyMaterial {
            density,
            kappa_ortho,
            volume: mass.volume,
        };
        Ok(Self {
            name: name.into(),
            mesh,
            mass: Some(mass),
            material,
        })
    }

    pub fn new_static(name: impl Into<String>, mesh: SurfaceMesh) -> Self {
        Self {
            name: name.into(),
            mesh,
            mass: None,
            material: BodyMaterial {
                density: 0.0,
                kappa_ortho: 0.0,
                volume: 0.0,
            },
        }
    }

    pub fn is_static(&self) -> bool {
        self.mass.is_none()
    }

    pub fn world_vertices(&self, q: &BodyCoords) -> Vec<Vec3> {
        self.mesh.vertices.iter().map(|x| world_position(q, x)).collect()
    }
}

/// `A x̄ + p`.
pub fn world_position(q: &BodyCoords, x_bar: &Vec3) -> Vec3 {
    let q = &q.0;
    Vec3::new(
        q[0] + q[3] * x_bar.x + q[4] * x_bar.y + q[5] * x_bar.z,
        q[1] + q[6] * x_bar.x + q[7] * x_bar.y + q[8] * x_bar.z,
        q[2] + q[9] * x_bar.x + q[10] * x_bar.y + q[11] * x_bar.z,
    )
}

/// The constant 3×12 map `J(x̄)` from coordinates to world position.
pub fn jacobian(x_bar: &Vec3) -> SMatrix<f64, 3, 12> {
    let mut j = SMatrix::<f64, 3, 12>::zeros();
    for i in 0..3 {
        j[(i, i)] = 1.0;
        for k in 0..3 {
            j[(i, 3 + 3 * i + k)] = x_bar[k];
        }
    }
    j
}

/// `J(x̄)ᵀ f` without forming `J`.
pub fn jacobian_transpose_mul(x_bar: &Vec3, f: &Vec3) -> Vec12 {
    let mut g = Vec12::zeros();
    for i in 0..3 {
        g[i] = f[i];
        for k in 0..3 {
            g[3 + 3 * i + k] = f[i] * x_bar[k];
        }
    }
    g
}

impl GeneralizedMass {
    /// Assembles `M = ∫ρ JᵀJ` from density-weighted moments.
    pub fn from_moments(mass: f64, first_moment: Vec3, second_moment: Mat3, volume: f64) -> Result<Self> {
        let mut m = Mat12::zeros();
        for i in 0..3 {
            m[(i, i)] = mass;
            for k in 0..3 {
                m[(i, 3 + 3 * i + k)] = first_moment[k];
                m[(3 + 3 * i + k, i)] = first_moment[k];
            }
            m.fixed_view_mut::<3, 3>(3 + 3 * i, 3 + 3 * i).copy_from(&second_moment);
        }
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::DegenerateGeometry("generalized mass matrix is not positive definite".into()))?;
        Ok(Self {
            mass,
            first_moment,
            second_moment,
            assembled: m,
            volume,
            chol,
        })
    }

    pub fn solve(&self, rhs: &Vec12) -> Vec12 {
        self.chol.solve(rhs)
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.first_moment / self.mass
    }
}

/// Exact volume, first and second moments of a closed, outward-oriented
/// triangle surface via the divergence theorem (signed tetrahedra against a
/// reference point), scaled by `density`.
pub fn mass_matrix(mesh: &SurfaceMesh, density: f64) -> Result<GeneralizedMass> {
    mesh.check_closed()?;
    let origin = mesh.vertices[0];
    let mut vol = 0.0;
    let mut first = Vec3::zeros();
    let mut second = Mat3::zeros();
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t).map(|v| v - origin);
        let v = a.dot(&b.cross(&c)) / 6.0;
        let s = a + b + c;
        vol += v;
        first += s * (v / 4.0);
        second += (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose()) * (v / 20.0);
    }
    if vol <= 0.0 {
        return Err(Error::InvertedMesh(vol));
    }
    // Shift moments from the reference point back to the body origin.
    let shifted_second = second + first * origin.transpose() + origin * first.transpose() + origin * origin.transpose() * vol;
    let shifted_first = first + origin * vol;
    GeneralizedMass::from_moments(density * vol, shifted_first * density, shifted_second * density, vol)
}

/// `κν (Σ (aᵢ·aᵢ − 1)² + Σ_{i≠j} (aᵢ·aⱼ)²)`.
pub fn ortho_energy(q: &BodyCoords, material: &BodyMaterial) -> f64 {
    let a = [q.row(0), q.row(1), q.row(2)];
    let mut e = 0.0;
    for i in 0..3 {
        e += (a[i].dot(&a[i]) - 1.0).powi(2);
        for j in 0..3 {
            if i != j {
                e += a[i].dot(&a[j]).powi(2);
            }
        }
    }
    material.stiffness() * e
}

pub fn ortho_gradient(q: &BodyCoords, material: &BodyMaterial) -> Vec12 {
    let a = [q.row(0), q.row(1), q.row(2)];
    let k = material.stiffness();
    let mut g = Vec12::zeros();
    for i in 0..3 {
        let mut gi = a[i] * (2.0 * (a[i].dot(&a[i]) - 1.0));
        for j in 0..3 {
            if j != i {
                gi += a[j] * (2.0 * a[j].dot(&a[i]));
            }
        }
        g.fixed_rows_mut::<3>(3 + 3 * i).copy_from(&(gi * (2.0 * k)));
    }
    g
}

/// Full Hessian of the orthogonality potential, including the cross blocks
/// `∂²V/∂aᵢ∂aⱼ = 4κν (aⱼ aᵢᵀ + (aᵢ·aⱼ) I)`.
pub fn ortho_hessian(q: &BodyCoords, material: &BodyMaterial, project: bool) -> Mat12 {
    let a = [q.row(0), q.row(1), q.row(2)];
    let k = material.stiffness();
    let mut h = Mat12::zeros();
    for i in 0..3 {
        let mut hii = a[i] * a[i].transpose() * 4.0 + Mat3::identity() * (2.0 * (a[i].dot(&a[i]) - 1.0));
        for j in 0..3 {
            if j != i {
                hii += a[j] * a[j].transpose() * 2.0;
                let hij = (a[j] * a[i].transpose() + Mat3::identity() * a[i].dot(&a[j])) * (4.0 * k);
                h.fixed_view_mut::<3, 3>(3 + 3 * i, 3 + 3 * j).copy_from(&hij);
            }
        }
        h.fixed_view_mut::<3, 3>(3 + 3 * i, 3 + 3 * i).copy_from(&(hii * (2.0 * k)));
    }
    if project {
        // The translation block is identically zero; only the 9×9 part needs projecting.
        let sub: SMatrix<f64, 9, 9> = h.fixed_view::<9, 9>(3, 3).into_owned();
        h.fixed_view_mut::<9, 9>(3, 3).copy_from(&project_psd(&sub));
    }
    h
}

/// A world-frame force applied at a material point.
#[derive(Clone, Copy, Debug)]
pub struct PointForce {
    pub x_bar: Vec3,
    pub force: Vec3,
}

/// Gravity plus point forces as a generalized force `Σ J(x̄ₖ)ᵀ fₖ`.
pub fn external_generalized_force(gmass: &GeneralizedMass, gravity: &Vec3, point_forces: &[PointForce]) -> Vec12 {
    let mut f = Vec12::zeros();
    for i in 0..3 {
        f[i] = gmass.mass * gravity[i];
        f.fixed_rows_mut::<3>(3 + 3 * i).copy_from(&(gmass.first_moment * gravity[i]));
    }
    for pf in point_forces {
        f += jacobian_transpose_mul(&pf.x_bar, &pf.force);
    }
    f
}

/// Equal and opposite point forces about the center of mass realizing the
/// world-frame `torque` for the current linear transform `a`.
pub fn torque_as_point_forces(gmass: &GeneralizedMass, a: &Mat3, torque: &Vec3, lever: f64) -> [PointForce; 2] {
    let c = gmass.center_of_mass();
    if torque.norm() == 0.0 {
        return [PointForce { x_bar: c, force: Vec3::zeros() }; 2];
    }
    // Rest-frame lever arm whose world image is perpendicular to the torque.
    let t = torque.normalize();
    let helper = if t.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let r_world = t.cross(&helper).normalize() * lever;
    let r_bar = a.try_inverse().map(|inv| inv * r_world).unwrap_or(r_world);
    let r_world = a * r_bar;
    let f = torque.cross(&r_world) / (2.0 * r_world.norm_squared());
    [
        PointForce { x_bar: c + r_bar, force: f },
        PointForce { x_bar: c - r_bar, force: -f },
    ]
}
