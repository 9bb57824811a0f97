//! Throughput of the inner kernels used by every Monte Carlo replica.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fraclan::fbm_core::{build_fbm_from_w, CirculantSampler};
use fraclan::frac_calculus::{AlphaOrder, MarchaudOperator};
use fraclan::gamma_estimator::{gamma_fou_reference, FouReferenceSettings};
use fraclan::likelihood::lan_decompose;
use fraclan::rng::replica_rng;
use fraclan::sde_engine::euler_solve;
use fraclan::{CoupledDriver, CouplingKernel, Diffusion, Fou, GirsanovOperator, Hurst, Path, SdeConfig, TimeGrid};
use std::hint::black_box;

fn hurst() -> Hurst {
    Hurst::new(0.7).unwrap()
}

fn circulant(c: &mut Criterion) {
    let mut group = c.benchmark_group("circulant_fbm");
    for n in [1 << 10, 1 << 13, 1 << 16] {
        let grid = TimeGrid::new(n as f64 / 16.0, n).unwrap();
        let sampler = CirculantSampler::new(grid, hurst()).unwrap();
        let mut rng = replica_rng(1, 0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(sampler.sample_increments(1, &mut rng)))
        });
    }
    group.finish();
}

fn coupling(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_fbm_from_w");
    for n in [1 << 10, 1 << 13] {
        let grid = TimeGrid::new(n as f64 / 16.0, n).unwrap();
        let kernel = CouplingKernel::with_tail_factor(hurst(), grid, 50.0).unwrap();
        let drv = CoupledDriver::sample_w_to_b(&kernel, 1, &mut replica_rng(2, 0)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(build_fbm_from_w(&kernel, &drv.w, &drv.w_tail).unwrap()))
        });
    }
    group.finish();
}

fn marchaud(c: &mut Criterion) {
    let mut group = c.benchmark_group("marchaud_apply");
    for n in [1 << 10, 1 << 14] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let op = MarchaudOperator::new(AlphaOrder::new(0.2).unwrap(), grid);
        let f: Vec<f64> = grid.times().iter().map(|t| t.sin()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(op.apply(&f, 0.0))));
    }
    group.finish();
}

fn lan(c: &mut Criterion) {
    let grid = TimeGrid::with_step(100.0, 0.0625).unwrap();
    let kernel = CouplingKernel::with_tail_factor(hurst(), grid, 4.0).unwrap();
    let op = GirsanovOperator::new(hurst(), grid).unwrap();
    let cfg = SdeConfig::new(vec![0.0], Diffusion::identity(1), vec![1.0]).unwrap();
    let drv = CoupledDriver::sample_w_to_b(&kernel, 1, &mut replica_rng(3, 0)).unwrap();
    let y: Path = euler_solve(&cfg, &Fou::scalar(), &drv.b).unwrap();
    c.bench_function("euler_fou_1600", |b| b.iter(|| black_box(euler_solve(&cfg, &Fou::scalar(), &drv.b).unwrap())));
    c.bench_function("lan_decompose_fou_1600", |b| {
        b.iter(|| black_box(lan_decompose(&op, &y, &drv.w, &Fou::scalar(), &[1.0], &[1.0], &cfg.sigma).unwrap()))
    });
}

fn gamma_reference(c: &mut Criterion) {
    let settings = FouReferenceSettings::default();
    c.bench_function("gamma_fou_reference", |b| {
        b.iter(|| black_box(gamma_fou_reference(1.0, hurst(), &settings).unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = circulant, coupling, marchaud, lan, gamma_reference
}
criterion_main!(benches);
