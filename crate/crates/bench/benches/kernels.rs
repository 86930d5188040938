use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aftnet::aft::{aft_forward_1d, AftBlock, AftConfig, AftMode, Direction};
use aftnet::autodiff::ParamStore;
use aftnet::ctensor::{complex_conv2d, complex_linear, ComplexConvWeights, ComplexLinearWeights};
use aftnet::models::{Model, ModelSpec, Variant};
use aftnet::train::{phantom_examples, TrainConfig, Trainer};
use aftnet::ComplexTensor;

fn kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let z = ComplexTensor::<f32>::randn(&[64, 320], &mut rng);
    let w = ComplexLinearWeights::new(ComplexTensor::randn(&[320, 320], &mut rng), None).unwrap();
    c.bench_function("linear 64x320 -> 320", |b| b.iter(|| complex_linear(black_box(&z), &w).unwrap()));

    let x = ComplexTensor::<f32>::randn(&[1, 16, 64, 64], &mut rng);
    let k = ComplexConvWeights::new(ComplexTensor::randn(&[32, 16, 3, 3], &mut rng), None, [1, 1], [1, 1]).unwrap();
    c.bench_function("conv3x3 16->32 at 64x64", |b| b.iter(|| complex_conv2d(black_box(&x), &k).unwrap()));

    let mut store = ParamStore::<f32>::new();
    let block = AftBlock::new(&mut store, "aft", AftConfig::exact(320, Direction::Forward, AftMode::Trainable), &mut rng);
    let rows = ComplexTensor::<f32>::randn(&[64, 320], &mut rng);
    c.bench_function("aft forward 64x320", |b| b.iter(|| aft_forward_1d(&block, &store, black_box(&rows)).unwrap()));
}

fn training(c: &mut Criterion) {
    let ex = phantom_examples::<f32>(1, (32, 32), 2, 4, 1).unwrap();
    let spec = ModelSpec::mri(Variant::I, 2, 32, 32);
    let mut t = Trainer::new(
        Model::new(spec).unwrap(),
        TrainConfig {
            epochs: 1_000_000,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    c.bench_function("AFTNet-I epoch, one 2x32x32 sample", |b| b.iter(|| t.run_epoch(&ex, &ex).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels, training
}
criterion_main!(benches);
