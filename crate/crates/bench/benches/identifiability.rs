//! Timing for the hot paths: joint evaluation in both arithmetic modes,
//! the closed-form recovery procedures, and the multistart oracle.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use num::BigRational;

use latentid::demo::{demo_observable, demo_params_one};
use latentid::{
    catalog_model, identify, observable_joint, sample_generic, DistTensor, ParameterSet,
    Tolerances,
};

fn bench_joint(c: &mut Criterion) {
    let mut group = c.benchmark_group("observable_joint");
    let float: ParameterSet<f64> = demo_params_one();
    group.bench_function("float/4-3e", |b| {
        b.iter(|| observable_joint(black_box(&float)))
    });
    let rational: ParameterSet<BigRational> = demo_params_one();
    group.bench_function("rational/4-3e", |b| {
        b.iter(|| observable_joint(black_box(&rational)))
    });
    group.finish();
}

fn bench_recovery(c: &mut Criterion) {
    let tols = Tolerances::default();
    let mut group = c.benchmark_group("identify");
    for id in ["3-0", "4-1", "4-2b"] {
        let model = catalog_model(id).unwrap();
        let params: ParameterSet<f64> = sample_generic(&model, 17);
        let obs = observable_joint(&params);
        group.bench_with_input(BenchmarkId::new("float", id), &obs, |b, obs| {
            b.iter(|| identify(black_box(&model), black_box(obs), &tols).unwrap())
        });
    }
    let demo: DistTensor<f64> = demo_observable();
    let star = catalog_model("4-3e").unwrap();
    group.bench_with_input(BenchmarkId::new("float", "4-3e"), &demo, |b, obs| {
        b.iter(|| identify(black_box(&star), black_box(obs), &tols).unwrap())
    });
    group.finish();
}

fn bench_multistart(c: &mut Criterion) {
    let tols = Tolerances::default();
    let model = catalog_model("4-0").unwrap();
    let params: ParameterSet<f64> = sample_generic(&model, 23);
    let obs = observable_joint(&params);
    let mut group = c.benchmark_group("multistart");
    group.sample_size(10);
    group.bench_function("4-0/20 starts", |b| {
        b.iter(|| {
            latentid::multistart_fiber_search(
                black_box(&model),
                black_box(&obs),
                20,
                7,
                &tols,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_joint, bench_recovery, bench_multistart);
criterion_main!(benches);
