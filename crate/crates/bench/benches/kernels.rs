use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use nodebound::bounds::{generalization_bound, GenBoundParams};
use nodebound::experiments::gen_sin_dataset;
use nodebound::numerics::{spectral_norm, Matrix};
use nodebound::oracles::{exact_covering_number, CoverStrategy, StaircaseClass};
use nodebound::training::train;
use nodebound::{Activation, Architecture, LossKind, NeuralOdeModel, TimeModulation, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn sin_model(width: usize) -> NeuralOdeModel {
    let arch = Architecture {
        input_dim: 2,
        state_dim: width,
        hidden: vec![width],
        output_dim: 1,
        input_map: true,
        output_map: true,
        activation: Activation::Relu,
        final_activation: false,
        modulation: TimeModulation::None,
        horizon: 1.0,
        steps: 3,
    };
    NeuralOdeModel::init(&arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn linear_algebra(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [64, 256] {
        let (a, b) = (random_matrix(n, n, 1), random_matrix(n, n, 2));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| bench.iter(|| a.matmul(black_box(&b))));
    }
    group.finish();
    let m = random_matrix(100, 100, 3);
    c.bench_function("spectral_norm/100", |bench| bench.iter(|| spectral_norm(black_box(&m), 1e-12, 10_000).unwrap()));
}

fn model(c: &mut Criterion) {
    let data = gen_sin_dataset(100, 0, 0.0).unwrap();
    let mut group = c.benchmark_group("sin_model");
    group.sample_size(10);
    for width in [100, 400] {
        let net = sin_model(width);
        group.bench_with_input(BenchmarkId::new("predict", width), &width, |bench, _| {
            bench.iter(|| net.predict_batch(black_box(&data.inputs)).unwrap())
        });
        let config = TrainConfig { epochs: 1, lr: 0.01, batch_size: 0, loss: LossKind::Mse, lambda: 0.1, seed: 0, steps: 3 };
        group.bench_with_input(BenchmarkId::new("train_epoch", width), &width, |bench, _| {
            bench.iter(|| {
                let mut m = net.clone();
                train(&mut m, &data, &data, &config).unwrap()
            })
        });
    }
    group.finish();
}

fn bounds_and_oracles(c: &mut Criterion) {
    let p = GenBoundParams {
        empirical_risk: 0.1,
        mu: 1.0,
        loss_bound: 1.0,
        delta: 0.05,
        horizon: 1.0,
        v: 1.0,
        d: 1,
        n: 100,
        b: Some(1.0),
    };
    c.bench_function("generalization_bound", |bench| bench.iter(|| generalization_bound(black_box(&p)).unwrap()));
    let class = StaircaseClass::new(6, 1.0, 1.0).unwrap().at_midpoints();
    c.bench_function("greedy_cover/staircase6", |bench| {
        bench.iter(|| exact_covering_number(black_box(&class), 0.25, CoverStrategy::Auto).unwrap())
    });
}

criterion_group!(benches, linear_algebra, model, bounds_and_oracles);
criterion_main!(benches);
