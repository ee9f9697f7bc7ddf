//! Scene builders used by the acceptance suite, benches and example files.
//!
//! Resting contacts start just inside the barrier range, close to where the
//! barrier balances gravity, so stacks do not pop apart on the first step.
//! Side-by-side neighbours start just outside it.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};

use super::config::{BodyConfig, ForceConfig, JointConfig, SceneConfig, ShapeConfig};
use crate::solver::StepParams;

/// Default contact accuracy in normalized units.
pub const D_HAT: f64 = 1e-3;
/// Initial gap of resting contacts, in units of `D_HAT`.
pub const RESTING_GAP: f64 = 0.97;
/// Initial gap between side-by-side neighbours, in units of `D_HAT`.
pub const CLEAR_GAP: f64 = 1.5;

fn scene(bodies: Vec<BodyConfig>, gravity: [f64; 3], step: StepParams) -> SceneConfig {
    SceneConfig {
        seed: 0,
        gravity,
        step,
        output: Default::default(),
        bodies,
        joints: Vec::new(),
        forces: Vec::new(),
    }
}

fn floor(size: [f64; 3]) -> BodyConfig {
    BodyConfig::new("floor", ShapeConfig::Box { size }, [0.0, -size[1] / 2.0, 0.0]).kinematic()
}

fn rows(r: &Rotation3<f64>) -> [[f64; 3]; 3] {
    let m = r.matrix();
    [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
}

/// Two unit cubes side by side, no floor.
pub fn two_cubes() -> SceneConfig {
    let cube = |name: &str, x: f64| BodyConfig::new(name, ShapeConfig::Box { size: [1.0; 3] }, [x, 0.0, 0.0]);
    scene(vec![cube("left", 0.0), cube("right", 1.5)], [0.0; 3], StepParams::default())
}

/// A cube dropped onto a static floor.
pub fn cube_drop(dt: f64) -> SceneConfig {
    let extent = 2.0;
    let cube = BodyConfig::new("cube", ShapeConfig::Box { size: [0.4; 3] }, [0.0, 0.2 + 0.1, 0.0]);
    let mut s = scene(vec![floor([extent, 0.1, extent]), cube], [0.0, -9.8, 0.0], StepParams { dt, ..Default::default() });
    s.bodies[1].rotation = Some([0.05, 0.0, 0.1]);
    s
}

/// A 4×4 wall of blocks on a floor, hit from above by a light ball.
pub fn wall_and_ball(dt: f64) -> SceneConfig {
    let extent = 2.0;
    let gap = RESTING_GAP * D_HAT * extent;
    let side_gap = CLEAR_GAP * D_HAT * extent;
    let (bx, by, bz) = (0.3, 0.15, 0.15);
    let mut bodies = vec![floor([extent, 0.1, extent])];
    for row in 0..4 {
        for col in 0..4 {
            let x = (col as f64 - 1.5) * (bx + side_gap);
            let y = gap + by / 2.0 + row as f64 * (by + gap);
            bodies.push(BodyConfig::new(format!("block_{row}_{col}"), ShapeConfig::Box { size: [bx, by, bz] }, [x, y, 0.0]));
        }
    }
    let top = 4.0 * (by + gap);
    let mut ball = BodyConfig::new(
        "ball",
        ShapeConfig::Icosphere {
            radius: 0.1,
            subdivisions: 2,
        },
        [0.12, top + 0.25, 0.0],
    );
    ball.density = 300.0;
    ball.velocity = [0.0, -2.0, 0.0];
    bodies.push(ball);
    scene(
        bodies,
        [0.0, -9.8, 0.0],
        StepParams {
            dt,
            mu: 0.2,
            ..Default::default()
        },
    )
}

/// A semicircular arch of `n` wedge-shaped voussoirs standing on a floor.
pub fn arch(n: usize, dt: f64) -> SceneConfig {
    let extent = 3.0;
    let gap = RESTING_GAP * D_HAT * extent;
    let (r, t, depth) = (1.0, 0.25, 0.4);
    let mut bodies = vec![floor([extent, 0.1, 1.0])];
    // Joint k lies along angle πk/n; faces are offset from it so every gap is uniform.
    let face = |k: usize, side: f64, rad: f64| {
        let a = PI * k as f64 / n as f64;
        let off = side * if k == 0 || k == n { gap } else { gap / 2.0 };
        [rad * a.cos() - off * a.sin(), rad * a.sin() + off * a.cos()]
    };
    for i in 0..n {
        let pts = [face(i, 1.0, r), face(i, 1.0, r + t), face(i + 1, -1.0, r + t), face(i + 1, -1.0, r)];
        let c = pts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0] / 4.0, acc[1] + p[1] / 4.0]);
        let polygon = pts.iter().map(|p| [p[0] - c[0], p[1] - c[1]]).collect();
        let mut b = BodyConfig::new(format!("voussoir_{i:03}"), ShapeConfig::Prism { polygon, depth }, [c[0], c[1], 0.0]);
        b.density = 2000.0;
        bodies.push(b);
    }
    scene(
        bodies,
        [0.0, -9.8, 0.0],
        StepParams {
            dt,
            mu: 0.5,
            ..Default::default()
        },
    )
}

/// A cube resting on a static plate tilted by `theta` (below 45°) about z.
pub fn incline(theta: f64, mu: f64, epsilon_v: f64, dt: f64) -> SceneConfig {
    let (len, thick, width, cube) = (1.0, 0.04, 0.3, 0.1);
    // The plate's x extent is the scene's largest below 45°.
    let extent = len * theta.cos() + thick * theta.sin();
    let gap = RESTING_GAP * D_HAT * extent;
    let n = [-theta.sin(), theta.cos(), 0.0];
    let mut plate = BodyConfig::new("incline", ShapeConfig::Box { size: [len, thick, width] }, [0.0; 3]).kinematic();
    plate.rotation = Some([0.0, 0.0, theta]);
    let off = thick / 2.0 + cube / 2.0 + gap;
    let mut block = BodyConfig::new("block", ShapeConfig::Box { size: [cube; 3] }, n.map(|v| v * off));
    block.rotation = Some([0.0, 0.0, theta]);
    scene(
        vec![plate, block],
        [0.0, -9.8, 0.0],
        StepParams {
            dt,
            mu,
            epsilon_v,
            newton_tol: 1e-7,
            ..Default::default()
        },
    )
}

/// A toothed gear on a fixed axis along z, driven by a torque, under gravity.
pub fn gear(teeth: usize, torque: f64, dt: f64) -> SceneConfig {
    let k = 4 * teeth;
    let polygon = (0..k)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / k as f64;
            let rad = if (i / 2) % 2 == 0 { 0.5 } else { 0.42 };
            [rad * a.cos(), rad * a.sin()]
        })
        .collect();
    let mut gear = BodyConfig::new("gear", ShapeConfig::Prism { polygon, depth: 0.15 }, [0.0; 3]);
    gear.density = 1000.0;
    let mut s = scene(
        vec![gear],
        [0.0, -9.8, 0.0],
        StepParams {
            dt,
            newton_tol: 1e-6,
            ..Default::default()
        },
    );
    s.joints.push(JointConfig::Axis {
        body: "gear".into(),
        point: [0.0; 3],
        direction: [0.0, 0.0, 1.0],
    });
    s.forces.push(ForceConfig {
        body: "gear".into(),
        force: None,
        point: None,
        torque: Some([0.0, 0.0, torque]),
        start: 0.0,
        end: f64::INFINITY,
    });
    s
}

/// Two links: the upper swings about a fixed z axis, the lower hangs from it
/// by a hinge along the upper link's x axis. Starts at rest, displaced.
pub fn pendulum(dt: f64) -> SceneConfig {
    let (w, l, gap) = (0.06, 0.5, 0.2);
    let r1 = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
    let down1 = r1 * Vector3::new(0.0, -1.0, 0.0);
    let c1 = down1 * (l / 2.0);
    let hinge = down1 * (l + gap / 2.0);
    let hinge_dir: Unit<Vector3<f64>> = Unit::new_normalize(r1 * Vector3::x());
    let r2 = Rotation3::from_axis_angle(&hinge_dir, 40f64.to_radians()) * r1;
    let c2 = hinge + r2 * Vector3::new(0.0, -(gap / 2.0 + l / 2.0), 0.0);
    let link = |name: &str, c: Vector3<f64>, r: &Rotation3<f64>| {
        let mut b = BodyConfig::new(name, ShapeConfig::Box { size: [w, l, w] }, [c.x, c.y, c.z]);
        b.linear = Some(rows(r));
        b
    };
    let mut s = scene(
        vec![link("upper", c1, &r1), link("lower", c2, &r2)],
        [0.0, -9.8, 0.0],
        StepParams {
            dt,
            newton_tol: 1e-6,
            ..Default::default()
        },
    );
    s.joints.push(JointConfig::Axis {
        body: "upper".into(),
        point: [0.0; 3],
        direction: [0.0, 0.0, 1.0],
    });
    s.joints.push(JointConfig::Hinge {
        bodies: ["upper".into(), "lower".into()],
        point: [hinge.x, hinge.y, hinge.z],
        direction: [hinge_dir.x, hinge_dir.y, hinge_dir.z],
    });
    s
}
