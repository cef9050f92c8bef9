use std::io::Write;
use std::path::PathBuf;

use dldl_core::data::save_predictions;
use dldl_core::metrics::EvalReport;
use dldl_core::model::{HeadKind, Model};
use dldl_core::train::{evaluate, predict_all, train, EpochLog};
use serde::Serialize;

use crate::cli::RunArgs;
use crate::config::RunConfig;
use crate::output::{cell, csv_line, write_json, write_text};

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub command: &'static str,
    pub head: HeadKind,
    pub seed: u64,
    pub epochs: u32,
    pub train: EvalReport,
    pub test: EvalReport,
    pub config: RunConfig,
}

pub struct TrainOutcome {
    pub model: Model,
    pub logs: Vec<EpochLog>,
    pub report: TrainReport,
}

/// Trains `head` with `seed` on the configured data. Writes nothing.
pub fn train_run(config: &RunConfig, head: HeadKind, seed: u64) -> anyhow::Result<TrainOutcome> {
    let (tr, te) = config.load_data()?;
    train_on(config, head, seed, &tr, &te)
}

pub fn train_on(
    config: &RunConfig,
    head: HeadKind,
    seed: u64,
    tr: &dldl_core::data::Dataset,
    te: &dldl_core::data::Dataset,
) -> anyhow::Result<TrainOutcome> {
    let mut model = Model::init(&config.model_spec(head)?, seed)?;
    let logs = train(&mut model, tr, Some(te), &config.train_config(seed), |_, _| {})?;
    let report = TrainReport {
        command: "train",
        head,
        seed,
        epochs: config.optimizer.epochs,
        train: evaluate(&model, tr, config.skip_zero_sigma)?,
        test: evaluate(&model, te, config.skip_zero_sigma)?,
        config: config.clone(),
    };
    Ok(TrainOutcome { model, logs, report })
}

pub fn log_csv(logs: &[EpochLog]) -> String {
    let mut s = String::from("epoch,lr,loss,ld,er,train_mae,test_mae\n");
    for l in logs {
        csv_line(
            &mut s,
            &[
                l.epoch.to_string(),
                cell(Some(l.lr)),
                cell(Some(l.loss)),
                cell(l.ld),
                cell(l.er),
                cell(Some(l.train_mae)),
                cell(l.test_mae),
            ],
        );
    }
    s
}

/// Paths written by [`cmd_train`].
pub struct TrainFiles {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub report: PathBuf,
    pub predictions: PathBuf,
}

/// Trains with the config's head and first seed and writes `checkpoint.json`,
/// `train_log.csv`, `report.json` and `predictions.csv` (test split) to `config.output`.
pub fn cmd_train(config: &RunConfig) -> anyhow::Result<(TrainOutcome, TrainFiles)> {
    let seed = config.seeds[0];
    let (tr, te) = config.load_data()?;
    let outcome = train_on(config, config.head, seed, &tr, &te)?;
    let dir = &config.output;
    let files = TrainFiles {
        checkpoint: dir.join("checkpoint.json"),
        log: dir.join("train_log.csv"),
        report: dir.join("report.json"),
        predictions: dir.join("predictions.csv"),
    };
    write_text(&files.checkpoint, &outcome.model.to_checkpoint().to_json())?;
    write_text(&files.log, &log_csv(&outcome.logs))?;
    write_json(&files.report, &outcome.report)?;
    save_predictions(&files.predictions, &predict_all(&outcome.model, &te)?, &te.targets())?;
    Ok((outcome, files))
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = super::resolve_config(&args.overrides)?;
    let (outcome, files) = cmd_train(&config)?;
    let r = &outcome.report;
    writeln!(out, "head {} seed {} epochs {}", r.head, r.seed, r.epochs)?;
    writeln!(out, "train mae {:.6}  test mae {:.6}", r.train.mae, r.test.mae)?;
    writeln!(out, "checkpoint {}", files.checkpoint.display())?;
    Ok(())
}
