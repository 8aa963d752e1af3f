use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hmmkit::training::baum_welch_step;
use hmmkit::{
    forward, posteriors, random_init, sample, viterbi, EmissionSpec, FitConfig, HmmParameters,
    ObservationSequence,
};

fn model_and_sequence(n_states: usize, len: usize) -> (HmmParameters, ObservationSequence) {
    let params = random_init(n_states, EmissionSpec::Categorical { n_symbols: 6 }, 42).unwrap();
    let (_, obs) = sample(&params, len, 7).unwrap();
    (params, obs)
}

fn bench_forward(c: &mut Criterion) {
    let (params, obs) = model_and_sequence(8, 1000);
    c.bench_function("forward n=8 t=1000", |b| {
        b.iter(|| forward(black_box(&params), black_box(&obs)).unwrap())
    });
}

fn bench_posteriors(c: &mut Criterion) {
    let (params, obs) = model_and_sequence(8, 1000);
    c.bench_function("posteriors n=8 t=1000", |b| {
        b.iter(|| posteriors(black_box(&params), black_box(&obs)).unwrap())
    });
}

fn bench_viterbi(c: &mut Criterion) {
    let (params, obs) = model_and_sequence(8, 1000);
    c.bench_function("viterbi n=8 t=1000", |b| {
        b.iter(|| viterbi(black_box(&params), black_box(&obs)).unwrap())
    });
}

fn bench_em_step(c: &mut Criterion) {
    let truth = random_init(4, EmissionSpec::Categorical { n_symbols: 6 }, 1).unwrap();
    let sequences: Vec<_> = (0..4)
        .map(|k| sample(&truth, 250, k).unwrap().1)
        .collect();
    let init = random_init(4, EmissionSpec::Categorical { n_symbols: 6 }, 99).unwrap();
    let config = FitConfig::default();
    c.bench_function("baum_welch_step n=4 k=4 t=250", |b| {
        b.iter(|| baum_welch_step(black_box(&init), black_box(&sequences), &config).unwrap())
    });
}

criterion_group!(benches, bench_forward, bench_posteriors, bench_viterbi, bench_em_step);
criterion_main!(benches);
