//! Fixtures shared by the benchmarks.

use abd_core::mesh::{box_mesh, icosphere};
use abd_core::{AffineBody, BodyCoords, Mat3, Vec3};
use nalgebra::Rotation3;

/// A static floor with `n` slightly tilted cubes stacked just inside the
/// contact band of each other.
pub fn cube_stack(n: usize, d_hat: f64) -> (Vec<AffineBody>, Vec<BodyCoords>) {
    let mut bodies = vec![AffineBody::new_static("floor", box_mesh(Vec3::new(3.0, 0.2, 3.0)))];
    let mut qs = vec![BodyCoords::from_parts(&Vec3::new(0.0, -0.1, 0.0), &Mat3::identity())];
    for i in 0..n {
        bodies.push(AffineBody::new_dynamic(format!("c{i}"), box_mesh(Vec3::repeat(0.2)), 1000.0, 1e8).unwrap());
        let tilt = Rotation3::from_euler_angles(0.002, 0.3 * i as f64, -0.002);
        let y = 0.1 + (i as f64 + 1.0) * 0.5 * d_hat + i as f64 * 0.2;
        qs.push(BodyCoords::from_parts(&Vec3::new(0.0, y, 0.0), tilt.matrix()));
    }
    (bodies, qs)
}

/// Two finely tessellated spheres a hair apart.
pub fn sphere_pair(subdivisions: u32, gap: f64) -> (Vec<AffineBody>, Vec<BodyCoords>) {
    let bodies = (0..2)
        .map(|i| AffineBody::new_dynamic(format!("s{i}"), icosphere(0.5, subdivisions), 1000.0, 1e8).unwrap())
        .collect();
    let qs = vec![
        BodyCoords::identity(),
        BodyCoords::from_parts(&Vec3::new(1.0 + gap, 0.0, 0.0), &Mat3::identity()),
    ];
    (bodies, qs)
}
