use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn abd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abd")).args(args).current_dir(cwd).output().unwrap()
}

fn scenes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes").canonicalize().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scene(dir: &Path, body: &str) -> PathBuf {
    std::fs::copy(scenes_dir().join("cube.obj"), dir.join("cube.obj")).unwrap();
    let path = dir.join("scene.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const TWO_CUBES: &str = r#"
[step]
dt = 0.01

[[bodies]]
name = "left"
mesh = "cube.obj"

[[bodies]]
name = "right"
mesh = "cube.obj"
position = [1.5, 0.0, 0.0]
velocity = [-1.0, 0.0, 0.0]
"#;

#[test]
fn simulate_writes_frames_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), TWO_CUBES);
    let out = dir.path().join("run");
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "5", "--out", out.to_str().unwrap(), "--audit"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for k in 0..=5 {
        assert!(out.join(format!("frame_{k:06}.obj")).is_file());
    }
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 6);
    assert!(stats.starts_with("step,newton_iters,min_distance"));
    let text = stdout(&o);
    assert!(text.contains("5 steps, 6 frames"), "{text}");
    assert!(text.contains("audit: 6 frames, 0 intersecting triangle pairs"), "{text}");
}

#[test]
fn output_directory_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), TWO_CUBES);
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "0"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("out/frame_000000.obj").is_file());

    let sub = dir.path().join("scenes");
    std::fs::create_dir(&sub).unwrap();
    let scene = write_scene(&sub, &format!("[output]\ndirectory = \"results\"\n{TWO_CUBES}"));
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "0"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(sub.join("results/frame_000000.obj").is_file());
}

#[test]
fn shipped_scene_runs_with_workers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let scene = scenes_dir().join("two_cubes.toml");
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "3", "--out", out.to_str().unwrap(), "--workers", "2", "--strict"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = abd(&["audit", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("audit: 4 frames, 0 intersecting"));
}

#[test]
fn bad_inputs_exit_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = abd(&["simulate", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.toml"));

    let overlap = TWO_CUBES.replace("[1.5, 0.0, 0.0]", "[0.5, 0.0, 0.0]");
    let scene = write_scene(dir.path(), &overlap);
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("left") && err.contains("right"), "{err}");

    let o = abd(&["audit", dir.path().join("nowhere").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = abd(&["simulate"], dir.path());
    assert_eq!(o.status.code(), Some(2), "clap usage errors exit with 2");
}

#[test]
fn strict_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), &TWO_CUBES.replace("dt = 0.01", "dt = 0.01\nmax_newton_iters = 1\nnewton_tol = 1e-12\nkappa_barrier = 1e8"));
    let out = dir.path().join("run");
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "60", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(!text.contains(", 0 not converged"), "{text}");
    let o = abd(&["simulate", scene.to_str().unwrap(), "--steps", "60", "--out", out.to_str().unwrap(), "--strict"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn audit_flags_intersecting_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cube = |dx: f64| {
        let mut s = String::new();
        for z in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for x in [0.0, 1.0] {
                    s += &format!("v {} {y} {z}\n", x + dx);
                }
            }
        }
        s
    };
    let faces = "f 1 3 4 2\nf 5 6 8 7\nf 1 2 6 5\nf 3 7 8 4\nf 1 5 7 3\nf 2 4 8 6\n";
    let shift = |f: &str| {
        f.lines()
            .map(|l| "f ".to_string() + &l[2..].split(' ').map(|i| (i.parse::<usize>().unwrap() + 8).to_string()).collect::<Vec<_>>().join(" ") + "\n")
            .collect::<String>()
    };
    let frame = |dx: f64| format!("o a\n{}{faces}o b\n{}{}", cube(0.0), cube(dx), shift(faces));
    std::fs::write(dir.path().join("frame_000000.obj"), frame(1.5)).unwrap();
    std::fs::write(dir.path().join("frame_000001.obj"), frame(0.5)).unwrap();
    let o = abd(&["audit", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("frame_000001.obj: a triangle"), "{text}");
    assert!(!text.contains("frame_000000.obj"), "{text}");
}
