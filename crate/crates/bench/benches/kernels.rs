use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dldl_core::data::{gen_synthetic, split, SynthConfig};
use dldl_core::label::{encode_distribution, make_label_space};
use dldl_core::model::{HeadKind, Model, ModelSpec};
use dldl_core::train::{train, TrainConfig};

fn spec(head: HeadKind) -> ModelSpec {
    ModelSpec {
        head,
        dims: vec![16, 64, 64],
        grid: make_label_space(0.0, 100.0, 1.0).unwrap(),
        lambda: 1.0,
        sigma: 2.0,
    }
}

fn encoding(c: &mut Criterion) {
    let space = make_label_space(0.0, 100.0, 1.0).unwrap();
    c.bench_function("encode_distribution K=101", |b| {
        b.iter(|| encode_distribution(black_box(37.25), 2.0, &space).unwrap())
    });
}

fn per_sample(c: &mut Criterion) {
    let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
    for head in [HeadKind::Joint, HeadKind::MrL2, HeadKind::Ranking] {
        let model = Model::init(&spec(head), 0).unwrap();
        c.bench_function(&format!("predict {head}"), |b| b.iter(|| model.predict(black_box(&x)).unwrap()));
        c.bench_function(&format!("loss_and_grad {head}"), |b| {
            b.iter(|| model.loss_and_grad(black_box(&x), 42.0).unwrap())
        });
    }
}

fn epoch(c: &mut Criterion) {
    let space = make_label_space(0.0, 100.0, 1.0).unwrap();
    let data = gen_synthetic(&SynthConfig::default(), &space).unwrap();
    let (tr, _) = split(&data, 0.8, 0).unwrap();
    let config = TrainConfig {
        epochs: 1,
        ..Default::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("one joint epoch, 1600 samples", |b| {
        b.iter(|| {
            let mut model = Model::init(&spec(HeadKind::Joint), 0).unwrap();
            train(&mut model, &tr, None, &config, |_, _| {}).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, encoding, per_sample, epoch);
criterion_main!(benches);
