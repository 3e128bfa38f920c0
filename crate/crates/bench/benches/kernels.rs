//! Criterion benchmarks for the hot kernels: partition sampling, the two
//! likelihood factorizations, the collapsed logistic density, and the
//! quasi-Monte-Carlo Gaussian CDF behind Brown-Resnick terms.
//!
//! Run with `cargo bench -p maxvi-bench`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use maxvi_core::model::{log_neg_vtau, st_loglik, EvalCtx};
use maxvi_core::mvn::{mvn_cdf, MvnProblem};
use maxvi_core::simulate::{sample_brown_resnick, sample_logistic};
use maxvi_core::vi::iwae_with_grads;
use maxvi_core::{
    DistanceMatrix, EpaParams, ModelParams, MvnConfig, RandomStream, SetPartition,
};

fn logistic_obs(d: usize) -> Vec<f64> {
    let params = ModelParams::logistic(0.6).unwrap();
    let ModelParams::Logistic(ref p) = params else { unreachable!() };
    sample_logistic(p, d, 1, RandomStream::new(17)).unwrap().remove(0)
}

fn br_params(d: usize) -> ModelParams {
    let sites: Vec<[f64; 2]> = (0..d)
        .map(|i| [(i % 3) as f64, (i / 3) as f64 * 0.8])
        .collect();
    ModelParams::brown_resnick(1.5, 1.2, sites).unwrap()
}

fn bench_epa_sampler(c: &mut Criterion) {
    let z = logistic_obs(10);
    let dist = DistanceMatrix::from_observation(&z).unwrap();
    let guide = EpaParams::new(1.0, 0.5, 1.0).unwrap();
    let stream = RandomStream::new(3);
    c.bench_function("epa_sample_d10", |b| {
        let mut k = 0u64;
        b.iter(|| {
            k += 1;
            let mut rng = stream.child(k).rng();
            black_box(guide.sample(black_box(&dist), &mut rng).unwrap())
        })
    });
}

fn bench_logistic_likelihoods(c: &mut Criterion) {
    let params = ModelParams::logistic(0.6).unwrap();
    let z = logistic_obs(10);
    let part: SetPartition = "1,4,7|2,5|3,6,8|9,10".parse().unwrap();
    let ctx = EvalCtx::new(RandomStream::new(0));
    c.bench_function("logistic_st_loglik_d10", |b| {
        b.iter(|| st_loglik(&params, black_box(&z), black_box(&part), &ctx).unwrap())
    });
    let ModelParams::Logistic(ref p) = params else { unreachable!() };
    for d in [10usize, 30] {
        let z = logistic_obs(d);
        c.bench_with_input(
            BenchmarkId::new("logistic_collapsed_loglik", d),
            &d,
            |b, _| b.iter(|| maxvi_core::mle::logistic_loglik(p, black_box(&z)).unwrap()),
        );
    }
}

fn bench_mvn_cdf(c: &mut Criterion) {
    // a correlated 5-dimensional orthant-style probability, the shape that
    // dominates Brown-Resnick exponent measures
    let dim = 5;
    let mut corr = vec![0.4; dim * dim];
    for i in 0..dim {
        corr[i * dim + i] = 1.0;
    }
    let problem = MvnProblem::new(vec![0.7; dim], corr).unwrap();
    let cfg = MvnConfig::default();
    let stream = RandomStream::new(8);
    c.bench_function("mvn_cdf_dim5", |b| {
        b.iter(|| mvn_cdf(black_box(&problem), &cfg, stream).unwrap())
    });
}

fn bench_brown_resnick(c: &mut Criterion) {
    let params = br_params(5);
    let ModelParams::BrownResnick(ref p) = params else { unreachable!() };
    let obs = sample_brown_resnick(p, 1, RandomStream::new(21)).unwrap();
    let z = &obs[0];
    let part: SetPartition = "1,3|2,5|4".parse().unwrap();
    let ctx = EvalCtx::new(RandomStream::new(4));
    c.bench_function("brown_resnick_st_loglik_d5", |b| {
        b.iter(|| st_loglik(&params, black_box(z), black_box(&part), &ctx).unwrap())
    });
    c.bench_function("brown_resnick_log_neg_vtau_d5", |b| {
        b.iter(|| log_neg_vtau(&params, black_box(z), black_box(&[0, 2, 4]), &ctx).unwrap())
    });
}

fn bench_iwae(c: &mut Criterion) {
    let params = ModelParams::logistic(0.6).unwrap();
    let guide = EpaParams::new(1.0, 0.5, 1.0).unwrap();
    let z = logistic_obs(10);
    let dist = DistanceMatrix::from_observation(&z).unwrap();
    let stream = RandomStream::new(5);
    for m in [1usize, 20] {
        c.bench_with_input(BenchmarkId::new("iwae_with_grads_d10", m), &m, |b, &m| {
            let mut k = 0u64;
            b.iter(|| {
                k += 1;
                let ctx = EvalCtx::new(stream.child(k));
                iwae_with_grads(&params, &guide, black_box(&z), &dist, m, &ctx).unwrap()
            })
        });
    }
}

criterion_group!(
    kernels,
    bench_epa_sampler,
    bench_logistic_likelihoods,
    bench_mvn_cdf,
    bench_brown_resnick,
    bench_iwae
);
criterion_main!(kernels);
