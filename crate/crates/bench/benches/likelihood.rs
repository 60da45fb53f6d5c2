use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ezgp::inference::{grad_neg_profile_loglik, neg_profile_loglik};
use ezgp::{fit, predict_batch, FitConfig, ModelKind};
use ezgp_bench::{example4, params};

fn objective(c: &mut Criterion) {
    let d = example4(81);
    let mut g = c.benchmark_group("profile_likelihood");
    for kind in [ModelKind::Ezgp, ModelKind::Eezgp, ModelKind::Ec, ModelKind::AdUc] {
        let p = params(kind, &d);
        g.bench_function(BenchmarkId::new("value", kind), |b| {
            b.iter(|| neg_profile_loglik(black_box(&p), &d).unwrap())
        });
        g.bench_function(BenchmarkId::new("gradient", kind), |b| {
            b.iter(|| grad_neg_profile_loglik(black_box(&p), &d).unwrap())
        });
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let d = example4(81);
    let cfg = FitConfig {
        starts: 1,
        ..Default::default()
    };
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    for kind in [ModelKind::Eezgp, ModelKind::Ezgp] {
        g.bench_function(kind.name(), |b| b.iter(|| fit(black_box(&d), kind, &cfg).unwrap()));
    }
    g.finish();
    let m = fit(&d, ModelKind::Eezgp, &cfg).unwrap();
    c.bench_function("predict_batch/81", |b| b.iter(|| predict_batch(&m, black_box(d.inputs())).unwrap()));
}

criterion_group!(benches, objective, fitting);
criterion_main!(benches);
