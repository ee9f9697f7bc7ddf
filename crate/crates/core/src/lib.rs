//! Stiff affine body dynamics with barrier contact.
//!
//! Bodies carry twelve coordinates (a translation and a general linear map),
//! stay near-rigid through a stiff orthogonality potential and interact via a
//! smooth log barrier on primitive distances. Each time step minimizes the
//! implicit-Euler incremental potential with a projected Newton method whose
//! line search is filtered by continuous collision detection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod body;
pub mod ccd;
pub mod constraints;
pub mod contact;
pub mod distance;
pub mod error;
pub mod intersect;
pub mod math;
pub mod mesh;
pub mod scene;
pub mod solver;

pub use body::{AffineBody, BodyCoords, BodyMaterial, BodyState, GeneralizedMass};
pub use error::{Error, Result};
pub use math::{Mat3, Vec12, Vec3};
pub use mesh::{Aabb, SurfaceMesh};
pub use scene::config::SceneConfig;
pub use scene::Scene;
pub use solver::{Simulation, StepParams, StepStats};
