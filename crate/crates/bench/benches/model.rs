use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deni_bench::{desk, training_set};
use deni_core::derive_stream;
use deni_core::model::{backward, forward, ForwardMode, Regularizer, TuningMode};

fn train_step(c: &mut Criterion) {
    let set = training_set(2);
    let (x, y) = set.rows(&(0..8).collect::<Vec<_>>());
    let mut group = c.benchmark_group("forward_backward_batch8");
    for (name, tuning) in [("head_only", TuningMode::HeadOnly), ("lora", TuningMode::lora()), ("full", TuningMode::Full)] {
        let (_, _, model) = desk(tuning);
        let mut rng = derive_stream(0, "model_noise");
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mode = ForwardMode::Train { rng: &mut rng, regularizer: Regularizer::Dropout };
                let (_, cache) = forward(&model, x.view(), mode).unwrap();
                backward(&model, &cache, &y).unwrap()
            })
        });
    }
    group.finish();
}

fn inference(c: &mut Criterion) {
    let set = training_set(250);
    let (_, _, model) = desk(TuningMode::HeadOnly);
    c.bench_function("forward_eval_1000", |b| b.iter(|| forward(&model, set.features.view(), ForwardMode::Eval).unwrap()));
}

criterion_group!(benches, train_step, inference);
criterion_main!(benches);
