//! Fixed-size linear algebra aliases and small dense helpers.

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Vec24 = SVector<f64, 24>;
pub type Mat24 = SMatrix<f64, 24, 24>;

/// Symmetric matrices whose negative eigenvalues can be clamped.
pub trait ProjectPsd: Sized {
    fn project_psd(&self) -> Self;
}

macro_rules! impl_project_psd {
    ($($n:literal),*) => {$(
        impl ProjectPsd for SMatrix<f64, $n, $n> {
            fn project_psd(&self) -> Self {
                let sym = (self + self.transpose()) * 0.5;
                let eig = SymmetricEigen::new(sym);
                if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
                    return sym;
                }
                let mut scaled = eig.eigenvectors;
                for (j, &l) in eig.eigenvalues.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(l.max(0.0));
                }
                scaled * eig.eigenvectors.transpose()
            }
        }
    )*};
}

impl_project_psd!(3, 9, 12);

/// Clamps the negative eigenvalues of a symmetric matrix to zero.
pub fn project_psd<M: ProjectPsd>(m: &M) -> M {
    m.project_psd()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(DMatrix::from_column_slice(N, N, sym.as_slice())).eigenvalues.min()
}

/// Frobenius norm of `A Aᵀ − I`.
pub fn orthogonality_defect(a: &Mat3) -> f64 {
    (a * a.transpose() - Mat3::identity()).norm()
}

/// Infinity norm of a slice of vectors.
pub fn inf_norm<'a, I>(vs: I) -> f64
where
    I: IntoIterator<Item = &'a Vec12>,
{
    vs.into_iter().map(|v| v.amax()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_projection_clamps_only_negative_part() {
        let m = SMatrix::<f64, 3, 3>::from_diagonal(&Vec3::new(2.0, -1.0, 0.5));
        let p = project_psd(&m);
        assert!((p - SMatrix::<f64, 3, 3>::from_diagonal(&Vec3::new(2.0, 0.0, 0.5))).norm() < 1e-14);
        assert!(min_eigenvalue(&p) > -1e-14);
    }

    #[test]
    fn rotation_has_zero_defect() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        assert!(orthogonality_defect(r.matrix()) < 1e-14);
        assert!((orthogonality_defect(&Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0))) - 3.0).abs() < 1e-14);
    }
}
