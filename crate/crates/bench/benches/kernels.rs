use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pdmp_control::pdmp::{simulate, FlowCache};
use pdmp_control::primal::{apply_t, QuadConfig, ValueGrid};
use pdmp_control::toy::ToyModel;
use pdmp_control::{rng, ConstantPolicy, PdmpModel, SimConfig, SpectralField};
use pdmp_control_bench::{bump, one_site, three_sites, toy_lattice};

fn semigroup(c: &mut Criterion) {
    let v = bump(32, 10.0);
    c.bench_function("semigroup_k32", |b| {
        b.iter(|| black_box(&v).semigroup(0.1, 1.0).unwrap())
    });
}

fn propagator(c: &mut Criterion) {
    let model = three_sites();
    let d = model.params().resting_config();
    let x = bump(32, 20.0);
    c.bench_function("propagator_build_k32", |b| {
        b.iter(|| {
            FlowCache::new()
                .propagator(&model, black_box(&d), 0.0)
                .unwrap()
        })
    });
    let p = FlowCache::new().propagator(&model, &d, 0.0).unwrap();
    c.bench_function("propagator_advance_k32", |b| {
        b.iter(|| p.advance(black_box(&x), 0.37))
    });
}

fn hh_path(c: &mut Criterion) {
    let model = one_site();
    let d = model.params().resting_config();
    let x = SpectralField::zeros(model.field_modes());
    let sim = SimConfig::default();
    let mut i = 0u64;
    c.bench_function("hh_one_site_path_5ms", |b| {
        b.iter(|| {
            i += 1;
            let mut r = rng::stream(1, "bench", i);
            simulate(&model, 0.0, &x, &d, &ConstantPolicy(1.0), &mut r, &sim).unwrap()
        })
    });
}

fn one_jump_operator(c: &mut Criterion) {
    let toy = ToyModel::two_mode_switch();
    let psi = ValueGrid::zeros(&toy_lattice(), toy.horizon(), 1).unwrap();
    let x = SpectralField::new(vec![0.4]).unwrap();
    let quad = QuadConfig::default();
    c.bench_function("apply_t_toy", |b| {
        b.iter(|| apply_t(&toy, &psi, 0.0, black_box(&x), &0, &quad).unwrap())
    });
}

criterion_group!(benches, semigroup, propagator, hh_path, one_jump_operator);
criterion_main!(benches);
