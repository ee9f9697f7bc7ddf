//! Scene file schema (TOML). Lengths, forces and densities are in the
//! file's own units; step parameters are in normalized units.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::solver::StepParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Seeds initial perturbations only.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub step: StepParams,
    #[serde(default)]
    pub output: OutputConfig,
    pub bodies: Vec<BodyConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forces: Vec<ForceConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    /// Write a frame every this many steps.
    pub frame_every: usize,
    pub audit: bool,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            frame_every: 1,
            audit: false,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeConfig {
    Box { size: [f64; 3] },
    Icosphere { radius: f64, subdivisions: u32 },
    /// Open rectangle in the xz-plane, kinematic bodies only.
    Quad { size: [f64; 2] },
    /// Polygon in the xy-plane extruded along z.
    Prism { polygon: Vec<[f64; 2]>, depth: f64 },
}

fn default_density() -> f64 {
    1000.0
}

fn default_kappa_ortho() -> f64 {
    crate::body::DEFAULT_KAPPA_ORTHO
}

fn is_zero(v: &[f64; 3]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero_scalar(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub name: String,
    /// OBJ file, relative to the scene file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeConfig>,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_kappa_ortho")]
    pub kappa_ortho: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub position: [f64; 3],
    /// Rows of the initial linear map `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<[[f64; 3]; 3]>,
    /// Rotation vector (axis times angle, radians); alternative to `linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub velocity: [f64; 3],
    /// World-frame angular velocity (radians per second).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub angular_velocity: [f64; 3],
    #[serde(default, skip_serializing_if = "is_false")]
    pub kinematic: bool,
    /// Uniform random offset of the position in `[-perturb, perturb]³`.
    #[serde(default, skip_serializing_if = "is_zero_scalar")]
    pub perturb: f64,
}

impl BodyConfig {
    pub fn new(name: impl Into<String>, shape: ShapeConfig, position: [f64; 3]) -> Self {
        Self {
            name: name.into(),
            mesh: None,
            shape: Some(shape),
            density: default_density(),
            kappa_ortho: default_kappa_ortho(),
            position,
            linear: None,
            rotation: None,
            velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            kinematic: false,
            perturb: 0.0,
        }
    }

    pub fn kinematic(mut self) -> Self {
        self.kinematic = true;
        self
    }
}

/// Joint anchors are world-frame positions at time zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JointConfig {
    /// The body may only rotate about the line through `point` along `direction`.
    Axis { body: String, point: [f64; 3], direction: [f64; 3] },
    /// Two bodies share a rotation axis.
    Hinge { bodies: [String; 2], point: [f64; 3], direction: [f64; 3] },
    /// Material points pinned in place.
    FixedVertices { body: String, points: Vec<[f64; 3]> },
}

fn default_end() -> f64 {
    f64::INFINITY
}

fn is_infinite(x: &f64) -> bool {
    x.is_infinite()
}

/// Force or torque on one body, active for `start ≤ t < end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<[f64; 3]>,
    /// Rest-frame application point; defaults to the center of mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 3]>,
    /// World-frame torque about the center of mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque: Option<[f64; 3]>,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "default_end", skip_serializing_if = "is_infinite")]
    pub end: f64,
}
