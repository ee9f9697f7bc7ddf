//! Second-order forward-mode dual numbers.
//!
//! A [`Dual2`] carries a value together with its gradient and Hessian with
//! respect to `N` independent variables. The distance kernels are written
//! once, generically over [`Real`], and evaluated either in plain `f64` or in
//! `Dual2<12>` to obtain exact first and second derivatives with respect to
//! the twelve coordinates of a primitive pair.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{SMatrix, SVector};

/// Scalar arithmetic shared by `f64` and [`Dual2`].
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Dual2<const N: usize> {
    pub v: f64,
    pub g: SVector<f64, N>,
    pub h: SMatrix<f64, N, N>,
}

impl<const N: usize> Dual2<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: SVector::zeros(),
            h: SMatrix::zeros(),
        }
    }

    /// The `i`-th independent variable with value `v`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut g = SVector::zeros();
        g[i] = 1.0;
        Self {
            v,
            g,
            h: SMatrix::zeros(),
        }
    }

    /// Composes with a scalar function given its value and first two derivatives.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut h = self.h * df;
        h.ger(d2f, &self.g, &self.g, 1.0);
        Self { v: f, g: self.g * df, h }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            v: self.v * s,
            g: self.g * s,
            h: self.h * s,
        }
    }
}

impl<const N: usize> Add for Dual2<N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            g: self.g + o.g,
            h: self.h + o.h,
        }
    }
}

impl<const N: usize> Sub for Dual2<N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            g: self.g - o.g,
            h: self.h - o.h,
        }
    }
}

impl<const N: usize> Neg for Dual2<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Dual2<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut h = self.h * o.v;
        h.zip_apply(&o.h, |a, b| *a += self.v * b);
        h.ger(1.0, &self.g, &o.g, 1.0);
        h.ger(1.0, &o.g, &self.g, 1.0);
        Self {
            v: self.v * o.v,
            g: self.g * o.v + o.g * self.v,
            h,
        }
    }
}

impl<const N: usize> Div for Dual2<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let recip = o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
        self * recip
    }
}

impl<const N: usize> Real for Dual2<N> {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
}

/// Minimal 3-vector over a [`Real`] scalar.
#[derive(Clone, Copy, Debug)]
pub struct V3<T>(pub [T; 3]);

impl<T: Real> V3<T> {
    pub fn sub(&self, o: &Self) -> Self {
        V3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        V3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }
}

impl V3<f64> {
    pub fn from_vec3(v: &crate::math::Vec3) -> Self {
        V3([v.x, v.y, v.z])
    }
}

/// Lifts four points into dual 3-vectors whose twelve coordinates are the
/// independent variables, in point-major order.
pub fn dual_points(points: &[crate::math::Vec3; 4]) -> [V3<Dual2<12>>; 4] {
    let mut out = [V3([Dual2::constant(0.0); 3]); 4];
    for (i, p) in out.iter_mut().enumerate() {
        for (k, d) in p.0.iter_mut().enumerate() {
            d.v = points[i][k];
            d.g[3 * i + k] = 1.0;
        }
    }
    out
}
