use std::io::Write;
use std::path::PathBuf;

use anyhow::bail;
use dldl_core::data::Dataset;
use dldl_core::metrics::EvalReport;
use dldl_core::train::evaluate;
use serde::Serialize;

use crate::cli::{EvalArgs, SplitSide};
use crate::config::RunConfig;
use crate::output::write_json;

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub command: &'static str,
    pub checkpoint: PathBuf,
    pub split: &'static str,
    pub metrics: EvalReport,
    pub config: RunConfig,
}

pub fn select(config: &RunConfig, side: SplitSide) -> anyhow::Result<Dataset> {
    let (mut tr, te) = config.load_data()?;
    Ok(match side {
        SplitSide::Train => tr,
        SplitSide::Test => te,
        SplitSide::All => {
            tr.samples.extend(te.samples);
            tr
        }
    })
}

pub fn cmd_eval(config: &RunConfig, checkpoint: &std::path::Path, side: SplitSide) -> anyhow::Result<EvalOutput> {
    let model = super::load_checkpoint(checkpoint)?;
    if model.space() != &config.space()? {
        bail!("checkpoint grid differs from the configured grid");
    }
    let data = select(config, side)?;
    if data.dim() != model.input_dim() {
        bail!(
            "checkpoint expects {} input features, dataset has {}",
            model.input_dim(),
            data.dim()
        );
    }
    Ok(EvalOutput {
        command: "eval",
        checkpoint: checkpoint.to_path_buf(),
        split: match side {
            SplitSide::Train => "train",
            SplitSide::Test => "test",
            SplitSide::All => "all",
        },
        metrics: evaluate(&model, &data, config.skip_zero_sigma)?,
        config: config.clone(),
    })
}

pub fn run(args: &EvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = super::resolve_config(&args.overrides)?;
    let report = cmd_eval(&config, &args.checkpoint, args.split)?;
    match &args.report {
        Some(p) => write_json(p, &report)?,
        None => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
    }
    Ok(())
}
