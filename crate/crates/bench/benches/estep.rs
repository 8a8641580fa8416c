use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eqhard::assignment::{balanced_assign, balanced_assign_dense, hungarian_min_cost, CostMatrix};
use eqhard::decoders::{DecoderBank, ModelConfig};
use eqhard::em::{posterior, PriorModel};
use eqhard::pipeline::train_samples;
use eqhard::synthdata::{gen_corpus, CorpusSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cost(n: usize, k: usize, seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * k).map(|_| -rng.gen::<f64>()).collect();
    CostMatrix::new(n, k, values).unwrap()
}

fn assignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("balanced_assign");
    for (n, k) in [(640, 10), (1280, 20)] {
        let cost = random_cost(n, k, 7);
        group.bench_with_input(BenchmarkId::new("ssp", format!("{n}x{k}")), &cost, |b, cost| {
            b.iter(|| balanced_assign(cost).unwrap())
        });
    }
    let cost = random_cost(640, 10, 7);
    group.bench_function("dense/640x10", |b| b.iter(|| balanced_assign_dense(&cost).unwrap()));
    group.finish();

    let square = random_cost(128, 128, 3);
    c.bench_function("hungarian/128x128", |b| b.iter(|| hungarian_min_cost(&square).unwrap()));
}

fn estep(c: &mut Criterion) {
    let (corpus, _) = gen_corpus(&CorpusSpec {
        n_train: 640,
        n_valid: 0,
        n_test: 0,
        ..CorpusSpec::default()
    })
    .unwrap();
    let data = train_samples(&corpus);
    let bank = DecoderBank::new(&ModelConfig::default(), &corpus.model, 10, 0).unwrap();
    let contexts: Vec<_> = data.iter().map(|s| s.context.clone()).collect();
    let prior = PriorModel::uniform(10);

    c.bench_function("log_likelihood/640x10", |b| {
        b.iter(|| data.iter().map(|s| bank.log_prob_all(s, None).unwrap()).collect::<Vec<_>>())
    });
    let loglik: Vec<Vec<f64>> = data.iter().map(|s| bank.log_prob_all(s, None).unwrap()).collect();
    c.bench_function("posterior/640x10", |b| b.iter(|| posterior(&loglik, &prior, &contexts).unwrap()));
}

criterion_group!(benches, assignment, estep);
criterion_main!(benches);
