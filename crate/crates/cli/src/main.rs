use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abd_core::scene::audit::{audit_intersections, AuditReport};
use abd_core::scene::{run, with_workers, Scene};
use clap::{Parser, Subcommand};

/// Affine body dynamics simulator.
#[derive(Parser, Debug)]
#[command(name = "abd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scene and write frames plus stats.csv.
    Simulate {
        /// Scene file (TOML).
        scene: PathBuf,
        /// Number of time steps.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Output directory; defaults to the scene's `output.directory`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the scene setting. 0 uses all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Exit with status 2 if any step did not converge.
        #[arg(long)]
        strict: bool,
        /// Audit every written frame for intersections afterwards.
        #[arg(long)]
        audit: bool,
    },
    /// Check every frame in a run directory for inter-body intersections.
    Audit {
        dir: PathBuf,
    },
}

const EXIT_ERROR: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_AUDIT_FAILED: u8 = 3;

fn print_report(report: &AuditReport) {
    for (file, o) in &report.offenses {
        println!(
            "intersection in {}: {} triangle {} and {} triangle {}",
            file.display(),
            o.body_a,
            o.triangle_a,
            o.body_b,
            o.triangle_b
        );
    }
    println!(
        "audit: {} frames, {} intersecting triangle pairs",
        report.frames_checked,
        report.offenses.len()
    );
}

fn output_dir(scene_path: &Path, scene: &Scene, out: Option<PathBuf>) -> PathBuf {
    if let Some(out) = out {
        return out;
    }
    match &scene.output.directory {
        Some(d) if d.is_relative() => scene_path.parent().unwrap_or(Path::new("")).join(d),
        Some(d) => d.clone(),
        None => PathBuf::from("out"),
    }
}

fn simulate(scene_path: &Path, steps: usize, out: Option<PathBuf>, workers: Option<usize>, strict: bool, audit: bool) -> abd_core::Result<u8> {
    let mut scene = Scene::load(scene_path)?;
    let dir = output_dir(scene_path, &scene, out);
    let workers = workers.unwrap_or(scene.output.workers);
    let audit = audit || scene.output.audit;
    let summary = with_workers(workers, || run(&mut scene, steps, Some(&dir)))??;
    let iters: usize = summary.rows.iter().map(|r| r.stats.newton_iters).sum();
    let mean = if summary.rows.is_empty() { 0.0 } else { iters as f64 / summary.rows.len() as f64 };
    println!(
        "{} steps, {} frames in {}, mean Newton iterations {mean:.2}, {} not converged",
        summary.rows.len(),
        summary.frames.len(),
        dir.display(),
        summary.nonconverged_steps
    );
    if audit {
        let report = with_workers(workers, || audit_intersections(&dir))??;
        print_report(&report);
        if !report.passed() {
            return Ok(EXIT_AUDIT_FAILED);
        }
    }
    if strict && summary.nonconverged_steps > 0 {
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scene,
            steps,
            out,
            workers,
            strict,
            audit,
        } => simulate(&scene, steps, out, workers, strict, audit),
        Command::Audit { dir } => audit_intersections(&dir).map(|report| {
            print_report(&report);
            if report.passed() {
                0
            } else {
                EXIT_AUDIT_FAILED
            }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
