use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sinai_bench::reference_torus;
use sinai_core::billiard::{billiard_map, orbit_monodromy, random_phase_point, PhasePoint};
use sinai_core::eigensolver::{assemble_laplacian, extract_trace, solve_lowest};
use sinai_core::geometry::BoundaryCondition;
use sinai_core::nodal::analyze_mode;
use sinai_core::spectral::{density_one_extract, log_with_square_spikes};

fn billiard(c: &mut Criterion) {
    let spec = reference_torus(BoundaryCondition::Dirichlet);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<PhasePoint> = (0..256).map(|_| random_phase_point(&spec, &mut rng)).collect();
    c.bench_function("billiard_map x256", |b| {
        b.iter(|| points.iter().map(|&p| billiard_map(&spec, p).unwrap().1).sum::<f64>())
    });
    c.bench_function("period-2 monodromy", |b| {
        b.iter(|| orbit_monodromy(&spec, PhasePoint::new(0, 0.0, 0.0), 2).unwrap())
    });
}

fn eigensolver(c: &mut Criterion) {
    let spec = reference_torus(BoundaryCondition::Dirichlet);
    let mut group = c.benchmark_group("eigensolver");
    group.sample_size(10);
    group.bench_function("assemble nx=128", |b| {
        b.iter(|| assemble_laplacian(&spec, 128).unwrap())
    });
    let lap = assemble_laplacian(&spec, 64).unwrap();
    group.bench_function("lowest 20 nx=64", |b| b.iter(|| solve_lowest(&lap, 20).unwrap()));
    group.finish();
}

fn nodal(c: &mut Criterion) {
    let spec = reference_torus(BoundaryCondition::Neumann);
    let lap = assemble_laplacian(&spec, 96).unwrap();
    let spectrum = solve_lowest(&lap, 30).unwrap();
    let pair = &spectrum.pairs[29];
    let traces = extract_trace(&spec, &spectrum.grid, pair).unwrap();
    c.bench_function("analyze mode 29 nx=96", |b| {
        b.iter_batched(
            || traces.clone(),
            |t| analyze_mode(&spec, &spectrum.grid, pair, &t).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn density(c: &mut Criterion) {
    let a = log_with_square_spikes(100_000);
    c.bench_function("density extraction W=1e5", |b| b.iter(|| density_one_extract(&a)));
}

criterion_group!(benches, billiard, eigensolver, nodal, density);
criterion_main!(benches);
