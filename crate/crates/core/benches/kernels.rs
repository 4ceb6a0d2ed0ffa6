//! Parallel vs sequential. `seq` runs in a one-thread pool, `par` in a pool
//! sized to the machine. Build with `--no-default-features` to time the
//! sequential fallback itself.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metaformer::model::{AtlasEnsemble, HeadMode, SatConfig};
use metaformer::nn::kernels::matmul;
use metaformer::par;
use metaformer::data::AtlasSpec;
use metaformer::train::{train_epoch, AdamW, ClassifyObjective, Example, TrainConfig};

fn cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn modes() -> [(&'static str, usize); 2] {
    [("seq", 1), ("par", cores())]
}

fn bench_matmul(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut g = c.benchmark_group("matmul");
    for &n in &[64usize, 256] {
        let a: Vec<f64> = (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect();
        for (name, threads) in modes() {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |bench, &n| {
                par::with_threads(threads, || bench.iter(|| matmul(black_box(&a), black_box(&b), n, n, n)))
            });
        }
    }
    g.finish();
}

fn bench_epoch(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let configs: Vec<SatConfig> = [("AAL", 16), ("CC200", 20), ("DOS160", 24)]
        .iter()
        .map(|&(name, k)| SatConfig {
            atlas: AtlasSpec::new(name, k).unwrap(),
            d_model: 32,
            n_layers: 2,
            d_ff: 16,
            n_heads: 4,
            dropout_rate: 0.1,
        })
        .collect();
    let model = AtlasEnsemble::metaformer(&configs, HeadMode::Classify, &mut r).unwrap();
    let examples: Vec<Example> = (0..128)
        .map(|i| Example {
            views: configs
                .iter()
                .map(|c| (0..c.input_len()).map(|_| r.random_range(-1.0..1.0)).collect())
                .collect(),
            label: i % 2,
        })
        .collect();
    let cfg = TrainConfig {
        batch_size: 32,
        ..TrainConfig::default()
    };
    let objective = ClassifyObjective::new(&examples, &cfg);
    let all: Vec<usize> = (0..examples.len()).collect();
    let mut g = c.benchmark_group("train_epoch");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |bench| {
            par::with_threads(threads, || {
                bench.iter(|| {
                    let mut m = model.clone();
                    let mut rng = ChaCha8Rng::seed_from_u64(3);
                    train_epoch(&mut m, &objective, &all, &mut AdamW::new(), &cfg, &mut rng).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_matmul, bench_epoch);
criterion_main!(benches);
