use std::hint::black_box;
use std::path::Path;

use abd_bench::{cube_stack, sphere_pair};
use abd_core::ccd::{accd_toi, CcdQuery, QueryKind};
use abd_core::contact::broad_phase::broad_phase;
use abd_core::contact::friction_precompute;
use abd_core::distance::{edge_edge_distance_sq, point_triangle_distance_sq};
use abd_core::scene::presets;
use abd_core::solver::assembly::{assemble, assemble_sequential, AssemblyInput, Ranks};
use abd_core::{Scene, StepParams, Vec12, Vec3};
use criterion::{criterion_group, criterion_main, Criterion};

fn distances(c: &mut Criterion) {
    let p = Vec3::new(0.2, 0.3, 0.4);
    let t = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.1)];
    c.bench_function("point_triangle_distance", |b| {
        b.iter(|| point_triangle_distance_sq(black_box(&p), &t[0], &t[1], &t[2]).unwrap())
    });
    let e = [Vec3::new(0.0, 0.0, 0.3), Vec3::new(1.0, 0.2, 0.3), Vec3::new(0.5, -1.0, 0.0), Vec3::new(0.4, 1.0, 0.1)];
    c.bench_function("edge_edge_distance", |b| {
        b.iter(|| edge_edge_distance_sq(black_box(&e[0]), &e[1], &e[2], &e[3], 0.0).unwrap())
    });
    let q = CcdQuery {
        kind: QueryKind::PointTriangle,
        x: [p + Vec3::new(0.0, 0.0, 0.5), t[0], t[1], t[2]],
        dx: [Vec3::new(0.0, 0.0, -1.0), Vec3::zeros(), Vec3::zeros(), Vec3::new(0.0, 0.0, 0.2)],
        slack: 0.1,
        t_max: 1.0,
    };
    c.bench_function("accd_toi", |b| b.iter(|| accd_toi(black_box(&q)).unwrap()));
}

fn broad(c: &mut Criterion) {
    let mut g = c.benchmark_group("broad_phase");
    g.sample_size(20);
    for sub in [3, 5] {
        let (bodies, qs) = sphere_pair(sub, 5e-4);
        g.bench_function(format!("spheres_{}_triangles", bodies[0].mesh.triangles.len()), |b| {
            b.iter(|| broad_phase(black_box(&bodies), &qs, &qs, 1e-3))
        });
    }
    g.finish();
}

fn assembly(c: &mut Criterion) {
    let p = StepParams {
        d_hat: 1e-2,
        mu: 0.4,
        ..StepParams::default()
    };
    let (bodies, qs) = cube_stack(20, p.d_hat);
    let q_tilde: Vec<Vec12> = qs.iter().map(|q| q.0).collect();
    let (cands, _) = broad_phase(&bodies, &qs, &qs, p.d_hat);
    let friction = friction_precompute(&bodies, &qs, &cands.pairs, p.kappa_barrier, p.d_hat, p.mu).unwrap();
    let ranks = Ranks::new(&bodies);
    let input = AssemblyInput {
        bodies: &bodies,
        qs: &qs,
        q_tilde: &q_tilde,
        candidates: &cands.pairs,
        body_pairs: &cands.body_pairs,
        friction: &friction,
        params: &p,
        ranks: &ranks,
    };
    let mut g = c.benchmark_group("assembly_20_cubes");
    g.bench_function("two_pass", |b| b.iter(|| assemble(black_box(&input)).unwrap()));
    g.bench_function("sequential", |b| b.iter(|| assemble_sequential(black_box(&input)).unwrap()));
    g.finish();
}

fn step(c: &mut Criterion) {
    let scene = Scene::from_config(&presets::cube_drop(0.01), Path::new(".")).unwrap();
    let mut g = c.benchmark_group("step");
    g.sample_size(20);
    g.bench_function("cube_drop", |b| {
        b.iter_batched(|| scene.clone(), |mut s| s.step().unwrap(), criterion::BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, distances, broad, assembly, step);
criterion_main!(benches);
