//! Parallel and sequential kernels side by side.

use std::hint::black_box;

use boselab::exact::{assemble_hamiltonian, propagate};
use boselab::fock::{coherent_state, FockBasis};
use boselab::krylov::KrylovOptions;
use boselab::lattice::{Grid1D, LatticeModel, Orbital, PairPotential};
use boselab::{par, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn model() -> LatticeModel {
    let g = Grid1D::new(4, 1.0).unwrap();
    LatticeModel::new(PairPotential::gaussian(g, 1.0, 1.0).unwrap(), None).unwrap()
}

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("sector_matvec");
    for n in [32usize, 64] {
        let basis = FockBasis::new(4, n).unwrap();
        let h = assemble_hamiltonian(&model(), n, &basis).unwrap();
        let block = h.sector_block(n);
        let x: Vec<C64> = (0..block.ncols()).map(|i| C64::new((i % 7) as f64, 1.0)).collect();
        let mut y = vec![C64::new(0.0, 0.0); block.nrows()];
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| block.matvec_seq(black_box(&x), &mut y))
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| block.matvec(black_box(&x), &mut y))
        });
    }
    group.finish();
}

fn dot(c: &mut Criterion) {
    let mut group = c.benchmark_group("dot");
    for len in [1usize << 12, 1 << 20] {
        let a: Vec<C64> = (0..len).map(|i| C64::new(i as f64 * 1e-6, 1.0)).collect();
        let b: Vec<C64> = (0..len).map(|i| C64::new(1.0, (i % 5) as f64)).collect();
        group.bench_with_input(BenchmarkId::new("sequential", len), &len, |bch, _| {
            bch.iter(|| par::dot_seq(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", len), &len, |bch, _| {
            bch.iter(|| par::dot(black_box(&a), black_box(&b)))
        });
    }
    group.finish();
}

fn propagation(c: &mut Criterion) {
    let n = 16;
    let m = model();
    let basis = FockBasis::new(4, FockBasis::adequate_cutoff(n as f64)).unwrap();
    let h = assemble_hamiltonian(&m, n, &basis).unwrap();
    let phi = Orbital::constant(m.grid).scaled(C64::new((n as f64).sqrt(), 0.0));
    let psi = coherent_state(&phi, &basis, 1e-12).unwrap().state;
    let mut group = c.benchmark_group("propagate");
    group.sample_size(10);
    group.bench_function("coherent_n16_t0.1", |b| {
        b.iter(|| propagate(&h, black_box(&psi), 0.1, 0.1, &KrylovOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, matvec, dot, propagation);
criterion_main!(benches);
