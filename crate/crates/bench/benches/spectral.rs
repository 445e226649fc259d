use criterion::{criterion_group, criterion_main, Criterion};
use kinfluid::macro_evolution::{evolve_mode, scaling_choice, well_prepared_init};
use kinfluid::spectral::{
    eigenvalue_census, log_eta_grid, matrix_fluid_eigenvalues, track_branches, DispersionSystem, DEFAULT_R_BAR,
};
use kinfluid::Complex64;
use kinfluid_bench::model;

const ETA: f64 = 1e-2;

fn spectral(c: &mut Criterion) {
    let m = model("alpha5.5-beta0", 64, 32);
    let seed = Complex64::new(0.0, m.acoustic_speed() * ETA);
    c.bench_function("dispersion_root_64x32", |b| {
        b.iter(|| DispersionSystem::new(&m.longitudinal, ETA).unwrap().find_root(seed).unwrap())
    });
    c.bench_function("census_64x32", |b| b.iter(|| eigenvalue_census(&m, ETA, DEFAULT_R_BAR).unwrap()));
    let etas = log_eta_grid(1e-3, 1e-1, 27).unwrap();
    c.bench_function("track_branches_27_eta", |b| b.iter(|| track_branches(&m, &etas).unwrap()));

    let mut slow = c.benchmark_group("dense");
    slow.sample_size(10);
    slow.bench_function("matrix_fluid_eigenvalues_64x32", |b| b.iter(|| matrix_fluid_eigenvalues(&m, ETA).unwrap()));
    let small = model("alpha8-beta0", 32, 12);
    let init = well_prepared_init(&small, [1.0, 0.0, 0.0], 7).unwrap();
    let gamma_exponent = scaling_choice(8.0, 0.0).unwrap();
    slow.bench_function("evolve_mode_32x12", |b| {
        b.iter(|| evolve_mode(&small, &init, ETA, gamma_exponent, 1.0, 201, 0.1).unwrap())
    });
    slow.finish();
}

criterion_group!(benches, spectral);
criterion_main!(benches);
