use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kcmlab_bench::east_sector;
use kcmlab_core::dynamics::{evolve, time_grid, KrylovOptions};
use kcmlab_core::modp::certified_rank;
use kcmlab_core::zeromode::{sector_counts, CountOptions};
use kcmlab_core::{build_hamiltonian, connected_components, enumerate_basis, ModelSpec};

fn hamiltonian(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_hamiltonian");
    for n in [5, 6] {
        let (spec, basis, _) = east_sector(2, n).unwrap();
        g.bench_with_input(BenchmarkId::new("east_r2", n), &n, |b, _| {
            b.iter(|| build_hamiltonian(&spec, &basis).unwrap())
        });
    }
    g.finish();
}

fn fragmentation(c: &mut Criterion) {
    let spec = ModelSpec::east_west(2, 14).unwrap();
    let basis = enumerate_basis(spec.geometry, Some(5)).unwrap();
    let h = build_hamiltonian(&spec, &basis).unwrap();
    c.bench_function("components_east_west_l14_n5", |b| b.iter(|| connected_components(&h)));
}

fn exact_rank(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact");
    g.sample_size(10);
    let (spec, _, h) = east_sector(2, 6).unwrap();
    g.bench_function("certified_rank_r2_n6", |b| b.iter(|| certified_rank(&h).unwrap()));
    let opts = CountOptions { cross_check_limit: 0, ..CountOptions::for_model(&spec) };
    g.bench_function("sector_counts_r2_n6", |b| b.iter(|| sector_counts(&spec, &h, &opts).unwrap()));
    g.finish();
}

fn krylov(c: &mut Criterion) {
    let (_, basis, h) = east_sector(2, 6).unwrap();
    let mut psi = vec![0.0; basis.dim()];
    psi[0] = 1.0;
    let times = time_grid(2.0, 0.1).unwrap();
    let opts = KrylovOptions::default();
    c.bench_function("krylov_r2_n6_t2", |b| b.iter(|| evolve(&h, &psi, &times, &[], &opts).unwrap()));
}

criterion_group!(benches, hamiltonian, fragmentation, exact_rank, krylov);
criterion_main!(benches);
