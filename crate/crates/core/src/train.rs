//! Mini-batch training with Adam and the step schedule, and dataset evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate as metric_report, mae, EvalReport};
use crate::model::{Model, ModelGrads};
use crate::optim::{AdamConfig, AdamState, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub epochs: u32,
    pub batch_size: usize,
    pub schedule: StepSchedule,
    /// Seeds the per-epoch shuffling.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: AdamConfig::default(),
            epochs: 60,
            batch_size: 64,
            schedule: StepSchedule::default(),
            shuffle_seed: 0,
        }
    }
}

/// Averages over the epoch's samples, taken as each batch was processed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u32,
    pub lr: f64,
    pub loss: f64,
    pub ld: Option<f64>,
    pub er: Option<f64>,
    /// Measured after the epoch's last update.
    pub train_mae: f64,
    pub test_mae: Option<f64>,
}

fn check_data(model: &Model, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if data.samples.iter().any(|s| s.features.len() != model.input_dim()) {
        return Err(Error::invalid(format!(
            "model expects {} features, dataset has {}",
            model.input_dim(),
            data.dim()
        )));
    }
    Ok(())
}

pub fn predict_all(model: &Model, data: &Dataset) -> Result<Vec<f64>> {
    check_data(model, data)?;
    data.samples.iter().map(|s| model.predict(&s.features)).collect()
}

/// Metrics on `data`. ε-error is reported when every sample has a σ; σ = 0 samples
/// are an error unless `skip_zero_sigma` is set.
pub fn evaluate(model: &Model, data: &Dataset, skip_zero_sigma: bool) -> Result<EvalReport> {
    let preds = predict_all(model, data)?;
    let sigmas = data.sigmas();
    metric_report(&preds, &data.targets(), sigmas.as_deref(), skip_zero_sigma)
}

/// Runs `config.epochs` epochs over `train`, calling `observer` after each one.
/// Batch gradients are sample means. A non-finite loss aborts with an error.
pub fn train<F>(
    model: &mut Model,
    train: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
    mut observer: F,
) -> Result<Vec<EpochLog>>
where
    F: FnMut(&EpochLog, &Model),
{
    check_data(model, train)?;
    if let Some(t) = test {
        check_data(model, t)?;
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(&model.param_shapes(), config.optimizer);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut logs = Vec::with_capacity(config.epochs as usize);
    let truths = train.targets();

    for epoch in 0..config.epochs {
        let lr = config.schedule.lr(config.optimizer.lr, epoch);
        order.shuffle(&mut rng);
        let (mut loss, mut ld, mut er) = (0.0, Some(0.0), Some(0.0));
        for batch in order.chunks(config.batch_size) {
            let mut grads = ModelGrads::zeros_like(model);
            for &i in batch {
                let s = &train.samples[i];
                let (sl, g) = model.loss_and_grad(&s.features, s.target)?;
                grads.add_assign(&g);
                loss += sl.loss;
                ld = ld.zip(sl.ld).map(|(a, b)| a + b);
                er = er.zip(sl.er).map(|(a, b)| a + b);
            }
            grads.scale(1.0 / batch.len() as f64);
            let g = grads.slices();
            adam.step(&mut model.param_slices_mut(), &g, lr)?;
        }
        if !model.is_finite() {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let n = train.len() as f64;
        let train_mae = mae(&predict_all(model, train)?, &truths)?;
        let test_mae = match test {
            Some(t) => Some(mae(&predict_all(model, t)?, &t.targets())?),
            None => None,
        };
        let log = EpochLog {
            epoch,
            lr,
            loss: loss / n,
            ld: ld.map(|v| v / n),
            er: er.map(|v| v / n),
            train_mae,
            test_mae,
        };
        observer(&log, model);
        logs.push(log);
    }
    Ok(logs)
}
