//! Scene loading, normalization, the stepping driver and frame output.
//!
//! Scenes are scaled uniformly so the largest extent of the initial
//! configuration is 1; everything written back out is de-normalized.

pub mod audit;
pub mod config;
pub mod obj;
pub mod presets;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::{external_generalized_force, torque_as_point_forces, AffineBody, BodyCoords, PointForce};
use crate::constraints::{build_layout, complete_tet, to_rest_frame, BodyTet, VertexRole, VirtualTet};
use crate::error::{Error, Result};
use crate::math::{Mat3, Vec12, Vec3};
use crate::mesh::{box_mesh, icosphere, prism_mesh, quad_mesh, Aabb, SurfaceMesh};
use crate::solver::{Simulation, StepStats};
use audit::audit_objects;
use config::{BodyConfig, ForceConfig, JointConfig, OutputConfig, SceneConfig, ShapeConfig};
use obj::{read_obj_merged, write_obj, ObjObject};

pub const STATS_HEADER: &str = "step,newton_iters,min_distance,candidate_pairs,ip_value,t_broad_phase,t_narrow_phase,t_assembly,t_solve,t_ccd,t_line_search";

/// A force in normalized units.
#[derive(Clone, Debug)]
struct AppliedForce {
    body: usize,
    force: Vec3,
    point: Option<Vec3>,
    torque: Vec3,
    start: f64,
    end: f64,
}

/// A loaded, normalized scene ready to step.
#[derive(Clone, Debug)]
pub struct Scene {
    pub sim: Simulation,
    /// Normalized length per file length unit.
    pub scale: f64,
    /// Gravity in normalized units.
    pub gravity: Vec3,
    pub output: OutputConfig,
    /// Virtual tetrahedra of constrained bodies.
    pub virtual_tets: Vec<Option<BodyTet>>,
    forces: Vec<AppliedForce>,
    /// Body rest size used as torque lever arm (normalized).
    levers: Vec<f64>,
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn rest_mesh(cfg: &BodyConfig, base: &Path) -> Result<SurfaceMesh> {
    let scene_err = |m: String| Error::Scene(format!("body `{}`: {m}", cfg.name));
    match (&cfg.mesh, &cfg.shape) {
        (Some(path), None) => {
            let path = base.join(path);
            let (v, t) = read_obj_merged(&path)?;
            SurfaceMesh::new(v, t)
        }
        (None, Some(shape)) => match shape {
            ShapeConfig::Box { size } => Ok(box_mesh(vec3(*size))),
            ShapeConfig::Icosphere { radius, subdivisions } => Ok(icosphere(*radius, *subdivisions)),
            ShapeConfig::Quad { size } => Ok(quad_mesh(size[0], size[1])),
            ShapeConfig::Prism { polygon, depth } => prism_mesh(polygon, *depth),
        },
        (Some(_), Some(_)) => Err(scene_err("give either `mesh` or `shape`, not both".into())),
        (None, None) => Err(scene_err("missing `mesh` or `shape`".into())),
    }
}

fn initial_linear(cfg: &BodyConfig) -> Result<Mat3> {
    match (cfg.linear, cfg.rotation) {
        (Some(_), Some(_)) => Err(Error::Scene(format!("body `{}`: give either `linear` or `rotation`", cfg.name))),
        (Some(rows), None) => Ok(Mat3::from_rows(&rows.map(|r| vec3(r).transpose()))),
        (None, Some(r)) => Ok(*Rotation3::new(Vector3::from(r)).matrix()),
        (None, None) => Ok(Mat3::identity()),
    }
}

fn scaled_mesh(mesh: &SurfaceMesh, s: f64) -> Result<SurfaceMesh> {
    SurfaceMesh::new(mesh.vertices.iter().map(|v| v * s).collect(), mesh.triangles.clone())
}

impl Scene {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SceneConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(&cfg, &base)
    }

    /// Builds a scene; relative mesh paths resolve against `base`.
    pub fn from_config(cfg: &SceneConfig, base: &Path) -> Result<Self> {
        if cfg.bodies.is_empty() {
            return Err(Error::Scene("scene has no bodies".into()));
        }
        let mut index = BTreeMap::new();
        for (i, b) in cfg.bodies.iter().enumerate() {
            if index.insert(b.name.clone(), i).is_some() {
                return Err(Error::Scene(format!("duplicate body name `{}`", b.name)));
            }
            if !b.kinematic && !(b.density > 0.0) {
                return Err(Error::Scene(format!("body `{}`: density must be positive", b.name)));
            }
            if !b.kinematic && !(b.kappa_ortho > 0.0) {
                return Err(Error::Scene(format!("body `{}`: kappa_ortho must be positive", b.name)));
            }
        }
        let lookup = |name: &str| -> Result<usize> { index.get(name).copied().ok_or_else(|| Error::Scene(format!("unknown body `{name}`"))) };
        cfg.step.validate()?;
        if cfg.output.frame_every == 0 {
            return Err(Error::Scene("output.frame_every must be at least 1".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut meshes = Vec::new();
        let mut qs = Vec::new();
        let mut extent = Aabb::empty();
        for b in &cfg.bodies {
            let mesh = rest_mesh(b, base)?;
            let a = initial_linear(b)?;
            let mut p = vec3(b.position);
            if b.perturb > 0.0 {
                p += Vec3::from_fn(|_, _| rng.random_range(-b.perturb..=b.perturb));
            }
            let q = BodyCoords::from_parts(&p, &a);
            for v in &mesh.vertices {
                extent.grow(&crate::body::world_position(&q, v));
            }
            meshes.push(mesh);
            qs.push(q);
        }
        let size = extent.extent().max();
        if !(size > 0.0) || !size.is_finite() {
            return Err(Error::Scene("scene has zero extent".into()));
        }
        let s = 1.0 / size;

        let mut bodies = Vec::new();
        let mut q_dots = Vec::new();
        let mut levers = Vec::new();
        for (i, b) in cfg.bodies.iter().enumerate() {
            let mesh = scaled_mesh(&meshes[i], s)?;
            levers.push(0.5 * mesh.bounding_box().extent().max());
            let body = if b.kinematic {
                AffineBody::new_static(b.name.clone(), mesh)
            } else {
                AffineBody::new_dynamic(b.name.clone(), mesh, b.density / s.powi(3), b.kappa_ortho / s)
                    .map_err(|e| Error::Scene(format!("body `{}`: {e}", b.name)))?
            };
            let q = &mut qs[i];
            let a = q.linear();
            *q = BodyCoords::from_parts(&(q.translation() * s), &a);
            let mut q_dot = Vec12::zeros();
            if !b.kinematic {
                let w = vec3(b.angular_velocity);
                let a_dot = w.cross_matrix() * a;
                q_dot = BodyCoords::from_parts(&(vec3(b.velocity) * s), &a_dot).0;
            }
            bodies.push(body);
            q_dots.push(q_dot);
        }

        check_initial_intersection(&bodies, &qs)?;

        let virtual_tets = build_joints(&cfg.joints, &bodies, &qs, s, &lookup)?;
        let is_static: Vec<bool> = bodies.iter().map(AffineBody::is_static).collect();
        let (layout, z) = build_layout(&is_static, &virtual_tets, &mut qs)?;

        let forces = cfg
            .forces
            .iter()
            .map(|f: &ForceConfig| {
                let body = lookup(&f.body)?;
                if bodies[body].is_static() {
                    return Err(Error::Scene(format!("force on kinematic body `{}`", f.body)));
                }
                Ok(AppliedForce {
                    body,
                    force: f.force.map_or_else(Vec3::zeros, vec3) * s,
                    point: f.point.map(|p| vec3(p) * s),
                    torque: f.torque.map_or_else(Vec3::zeros, vec3) * (s * s),
                    start: f.start,
                    end: f.end,
                })
            })
            .collect::<Result<_>>()?;

        let sim = Simulation::new(bodies, layout, z, qs, q_dots, cfg.step)?;
        Ok(Self {
            sim,
            scale: s,
            gravity: vec3(cfg.gravity) * s,
            output: cfg.output.clone(),
            virtual_tets,
            forces,
            levers,
        })
    }

    pub fn time(&self) -> f64 {
        self.sim.step as f64 * self.sim.params.dt
    }

    /// Generalized external forces for the step ending at `t + Δt`.
    pub fn external_forces(&self) -> Vec<Vec12> {
        let t = self.time() + self.sim.params.dt;
        self.sim
            .bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let Some(m) = &body.mass else { return Vec12::zeros() };
                let mut point_forces = Vec::new();
                for f in self.forces.iter().filter(|f| f.body == b && f.start <= t && t < f.end) {
                    if f.force.norm() > 0.0 {
                        point_forces.push(PointForce {
                            x_bar: f.point.unwrap_or_else(|| m.center_of_mass()),
                            force: f.force,
                        });
                    }
                    if f.torque.norm() > 0.0 {
                        point_forces.extend(torque_as_point_forces(m, &self.sim.qs[b].linear(), &f.torque, self.levers[b]));
                    }
                }
                external_generalized_force(m, &self.gravity, &point_forces)
            })
            .collect()
    }

    pub fn step(&mut self) -> Result<StepStats> {
        let f = self.external_forces();
        self.sim.advance_step(&f)
    }

    /// World-space meshes in file units, one object per body.
    pub fn frame_objects(&self) -> Vec<ObjObject> {
        let inv = 1.0 / self.scale;
        self.sim
            .bodies
            .iter()
            .zip(&self.sim.qs)
            .map(|(b, q)| ObjObject {
                name: b.name.clone(),
                vertices: b.world_vertices(q).into_iter().map(|v| v * inv).collect(),
                triangles: b.mesh.triangles.clone(),
            })
            .collect()
    }

    /// Virtual tetrahedron vertex positions of a constrained body (normalized).
    /// Shared vertices are read from the unknowns, so every body using one
    /// sees the same value.
    pub fn virtual_vertices(&self, body: usize) -> Option<[Vec3; 4]> {
        let t = self.virtual_tets[body].as_ref()?;
        let mut p = t.tet.vertices_for(&self.sim.qs[body]);
        for (i, role) in t.roles.iter().enumerate() {
            if let VertexRole::Shared(key) = role {
                p[i] = self.sim.layout.shared_vertex(*key, &self.sim.z)?;
            }
        }
        Some(p)
    }
}

fn check_initial_intersection(bodies: &[AffineBody], qs: &[BodyCoords]) -> Result<()> {
    let objects: Vec<ObjObject> = bodies
        .iter()
        .zip(qs)
        .map(|(b, q)| ObjObject {
            name: b.name.clone(),
            vertices: b.world_vertices(q),
            triangles: b.mesh.triangles.clone(),
        })
        .collect();
    if let Some(o) = audit_objects(&objects).first() {
        return Err(Error::InitialIntersection(o.body_a.clone(), o.body_b.clone()));
    }
    Ok(())
}

/// Joint anchors become fixed or shared virtual-tetrahedron vertices.
/// Anchors are in file units and scaled by `scale`.
fn build_joints(
    joints: &[JointConfig],
    bodies: &[AffineBody],
    qs: &[BodyCoords],
    scale: f64,
    lookup: &dyn Fn(&str) -> Result<usize>,
) -> Result<Vec<Option<BodyTet>>> {
    let mut anchors: Vec<Vec<(Vec3, VertexRole)>> = vec![Vec::new(); bodies.len()];
    let mut next_key = 0;
    let size = |b: usize| bodies[b].mesh.bounding_box().extent().max();
    let axis_points = |b: usize, point: &[f64; 3], direction: &[f64; 3]| -> Result<[Vec3; 2]> {
        let d = vec3(*direction);
        if !(d.norm() > 0.0) {
            return Err(Error::Scene(format!("joint on `{}`: zero axis direction", bodies[b].name)));
        }
        let c = vec3(*point) * scale;
        let h = d.normalize() * (0.5 * size(b));
        Ok([c - h, c + h])
    };
    for j in joints {
        match j {
            JointConfig::Axis { body, point, direction } => {
                let b = lookup(body)?;
                for x in axis_points(b, point, direction)? {
                    anchors[b].push((to_rest_frame(&qs[b], &x)?, VertexRole::Fixed));
                }
            }
            JointConfig::Hinge { bodies: names, point, direction } => {
                let (b0, b1) = (lookup(&names[0])?, lookup(&names[1])?);
                if b0 == b1 {
                    return Err(Error::Scene(format!("hinge joins `{}` to itself", names[0])));
                }
                let xs = axis_points(b0.min(b1), point, direction)?;
                for x in xs {
                    for b in [b0, b1] {
                        anchors[b].push((to_rest_frame(&qs[b], &x)?, VertexRole::Shared(next_key)));
                    }
                    next_key += 1;
                }
            }
            JointConfig::FixedVertices { body, points } => {
                let b = lookup(body)?;
                for p in points {
                    let x = vec3(*p) * scale;
                    anchors[b].push((to_rest_frame(&qs[b], &x)?, VertexRole::Fixed));
                }
            }
        }
    }
    anchors
        .into_iter()
        .enumerate()
        .map(|(b, list)| {
            if list.is_empty() {
                return Ok(None);
            }
            if bodies[b].is_static() {
                return Err(Error::Scene(format!("joint on kinematic body `{}`", bodies[b].name)));
            }
            let points: Vec<Vec3> = list.iter().map(|(p, _)| *p).collect();
            let com = bodies[b].mass.as_ref().expect("dynamic").center_of_mass();
            let rest = complete_tet(&points, &com, size(b)).map_err(|e| Error::Scene(format!("joints on `{}`: {e}", bodies[b].name)))?;
            let mut roles = [VertexRole::Free; 4];
            for (k, (_, role)) in list.iter().enumerate() {
                roles[k] = *role;
            }
            Ok(Some(BodyTet {
                tet: VirtualTet::new(rest)?,
                roles,
                rows: Vec::new(),
            }))
        })
        .collect()
}

/// Per-step record written to `stats.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsRow {
    pub step: usize,
    pub stats: StepStats,
    /// In file units.
    pub min_distance: f64,
}

impl StatsRow {
    pub fn csv(&self) -> String {
        let t = &self.stats.times;
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.step,
            self.stats.newton_iters,
            self.min_distance,
            self.stats.candidate_pairs,
            self.stats.ip_value,
            t.broad_phase,
            t.narrow_phase,
            t.assembly,
            t.solve,
            t.ccd,
            t.line_search
        );
        s
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub rows: Vec<StatsRow>,
    pub frames: Vec<PathBuf>,
    pub nonconverged_steps: usize,
}

pub fn frame_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("frame_{step:06}.obj"))
}

/// Steps the scene `n_steps` times, writing frames and `stats.csv` to `out`
/// when given. Frame 0 is the initial configuration.
pub fn run(scene: &mut Scene, n_steps: usize, out: Option<&Path>) -> Result<RunSummary> {
    let mut summary = RunSummary::default();
    let mut stats_file = None;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = frame_path(dir, 0);
        write_obj(&path, &scene.frame_objects())?;
        summary.frames.push(path);
        let stats_path = dir.join("stats.csv");
        let mut f = File::create(&stats_path).map_err(|e| Error::io(&stats_path, e))?;
        writeln!(f, "{STATS_HEADER}").map_err(|e| Error::io(&stats_path, e))?;
        stats_file = Some((f, stats_path));
    }
    for _ in 0..n_steps {
        let stats = scene.step()?;
        let step = scene.sim.step;
        if !stats.converged {
            summary.nonconverged_steps += 1;
        }
        let row = StatsRow {
            step,
            min_distance: stats.min_distance / scene.scale,
            stats,
        };
        if let Some((f, path)) = &mut stats_file {
            writeln!(f, "{}", row.csv()).map_err(|e| Error::io(&*path, e))?;
        }
        if let Some(dir) = out {
            if step.is_multiple_of(scene.output.frame_every) {
                let path = frame_path(dir, step);
                write_obj(&path, &scene.frame_objects())?;
                summary.frames.push(path);
            }
        }
        summary.rows.push(row);
    }
    Ok(summary)
}

/// Runs inside a pool of `workers` threads (0 keeps the global pool).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Scene(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}
