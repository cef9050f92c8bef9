//! End-to-end use of the public API: data, training, checkpoints, evaluation.

use dldl_core::data::{gen_synthetic, load_csv, split, SynthConfig};
use dldl_core::label::make_label_space;
use dldl_core::model::{Checkpoint, HeadKind, Model, ModelSpec};
use dldl_core::train::{evaluate, predict_all, train, TrainConfig};

fn small_setup() -> (ModelSpec, SynthConfig) {
    let grid = make_label_space(0.0, 20.0, 1.0).unwrap();
    let spec = ModelSpec {
        head: HeadKind::Joint,
        dims: vec![4, 16, 8],
        grid,
        lambda: 1.0,
        sigma: 2.0,
    };
    let synth = SynthConfig {
        n: 200,
        dim: 4,
        ..Default::default()
    };
    (spec, synth)
}

#[test]
fn trained_checkpoint_predicts_identically_after_reload() {
    let (spec, synth) = small_setup();
    let data = gen_synthetic(&synth, &spec.grid).unwrap();
    let (tr, te) = split(&data, 0.8, 0).unwrap();
    let mut model = Model::init(&spec, 4).unwrap();
    let before = evaluate(&model, &te, false).unwrap().mae;
    let config = TrainConfig {
        epochs: 8,
        batch_size: 16,
        shuffle_seed: 4,
        optimizer: dldl_core::optim::AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
        ..Default::default()
    };
    let logs = train(&mut model, &tr, Some(&te), &config, |_, _| {}).unwrap();
    assert_eq!(logs.len(), 8);
    let after = evaluate(&model, &te, false).unwrap().mae;
    assert!(after < before, "{after} !< {before}");

    let reloaded = Checkpoint::from_json(&model.to_checkpoint().to_json())
        .unwrap()
        .into_model()
        .unwrap();
    assert_eq!(predict_all(&model, &te).unwrap(), predict_all(&reloaded, &te).unwrap());
}

#[test]
fn csv_data_trains_like_generated_data() {
    let (spec, synth) = small_setup();
    let data = gen_synthetic(&synth, &spec.grid).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut text = String::from("f0,f1,f2,f3,y,sigma\n");
    for s in &data.samples {
        let f: Vec<String> = s.features.iter().map(|v| format!("{v:?}")).collect();
        text += &format!("{},{:?},{:?}\n", f.join(","), s.target, s.sigma.unwrap());
    }
    std::fs::write(&path, text).unwrap();
    let loaded = load_csv(&path, &spec.grid).unwrap();
    assert_eq!(loaded.samples, data.samples);
}
