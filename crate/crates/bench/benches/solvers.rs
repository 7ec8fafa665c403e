use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use palign::initial::SmoothPreset;
use palign::kinetic::{energies, kinetic_step, Scheme};
use palign::metrics::{phase_w1, transport_cost};
use palign::particle::{sample_initial, step_rk4, ParticleConfig, ParticleInit};
use palign::particle::Domain;
use palign::{AlignmentMap, CommunicationKernel};
use palign_bench::phase_fixture;

fn kernel() -> CommunicationKernel {
    CommunicationKernel::inverse_power(1.0).unwrap()
}

fn kinetic(c: &mut Criterion) {
    let map = AlignmentMap::p_power(2.5).unwrap();
    let mut g = c.benchmark_group("kinetic_step");
    for (nx, nv) in [(64, 128), (128, 256)] {
        let f = phase_fixture(nx, nv, 0.1);
        for scheme in [Scheme::Upwind, Scheme::Muscl] {
            g.bench_with_input(BenchmarkId::new(format!("{scheme:?}"), format!("{nx}x{nv}")), &f, |b, f| {
                b.iter(|| kinetic_step(black_box(f), &kernel(), &map, 1e-3, scheme).unwrap())
            });
        }
    }
    g.finish();
    let f = phase_fixture(64, 128, 0.1);
    c.bench_function("energies_64x128", |b| b.iter(|| energies(black_box(&f), &kernel(), &map, 1e-12)));
}

fn particles(c: &mut Criterion) {
    let map = AlignmentMap::p_power(3.0).unwrap();
    let mut g = c.benchmark_group("particle_rk4");
    for n in [64, 256] {
        let cfg = ParticleConfig {
            n,
            dim: 1,
            domain: Domain::Torus { period: 1.0 },
            dt: 0.01,
            t_final: 1.0,
            output_interval: 1.0,
            kernel: kernel(),
            map: map.clone(),
            seed: 1,
            init: ParticleInit { length: 1.0, jitter: 0.5, velocity_mean: 0.0, velocity_spread: 1.0 },
        };
        let ens = sample_initial(&cfg).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &ens, |b, e| {
            b.iter(|| step_rk4(black_box(e), &cfg.kernel, &map, 0.01).unwrap())
        });
    }
    g.finish();
}

fn transport(c: &mut Criterion) {
    let f = phase_fixture(32, 64, 0.1);
    let hydro = SmoothPreset::default().markers(256).unwrap();
    c.bench_function("phase_w1_32x64_c2", |b| b.iter(|| phase_w1(black_box(&f), &hydro, 2, 400).unwrap()));
    let n = 100;
    let w = vec![1.0 / n as f64; n];
    let cost: Vec<f64> = (0..n * n).map(|k| (((k * 7919) % 1009) as f64) / 1009.0).collect();
    c.bench_function("transport_100x100", |b| b.iter(|| transport_cost(&w, &w, black_box(&cost)).unwrap()));
}

criterion_group!(benches, kinetic, particles, transport);
criterion_main!(benches);
