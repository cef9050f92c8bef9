use std::io::Write;

use anyhow::bail;
use dldl_core::model::HeadKind;
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::RunArgs;
use crate::config::RunConfig;
use crate::output::{cell, csv_line, write_json, write_text};

use super::train::train_on;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub head: HeadKind,
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
    pub pearson: Option<f64>,
    pub epsilon_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadSummary {
    pub head: HeadKind,
    pub seeds: usize,
    pub mae_median: f64,
    pub mae_min: f64,
    pub mae_max: f64,
    /// `mae_max - mae_min`.
    pub mae_spread: f64,
    pub rmse_median: f64,
    /// Present when every seed produced a correlation.
    pub pearson_median: Option<f64>,
    pub epsilon_median: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub command: &'static str,
    pub summary: Vec<HeadSummary>,
    pub runs: Vec<RunResult>,
    pub config: RunConfig,
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(head: HeadKind, runs: &[&RunResult]) -> HeadSummary {
    let mae: Vec<f64> = runs.iter().map(|r| r.mae).collect();
    let rmse: Vec<f64> = runs.iter().map(|r| r.rmse).collect();
    let all = |f: fn(&RunResult) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = runs.iter().map(|r| f(r)).collect();
        v.map(|v| median(&v))
    };
    let lo = mae.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mae.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    HeadSummary {
        head,
        seeds: runs.len(),
        mae_median: median(&mae),
        mae_min: lo,
        mae_max: hi,
        mae_spread: hi - lo,
        rmse_median: median(&rmse),
        pearson_median: all(|r| r.pearson),
        epsilon_median: all(|r| r.epsilon_error),
    }
}

/// Trains every `(head, seed)` pair of the config on a shared split, in parallel,
/// and reports per-head medians over seeds on the test split.
pub fn cmd_compare(config: &RunConfig) -> anyhow::Result<CompareReport> {
    if config.heads.len() < 2 {
        bail!("compare needs at least two heads");
    }
    let (tr, te) = config.load_data()?;
    let jobs: Vec<(HeadKind, u64)> = config
        .heads
        .iter()
        .flat_map(|&h| config.seeds.iter().map(move |&s| (h, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(head, seed)| {
            let t = train_on(config, head, seed, &tr, &te)?.report.test;
            Ok(RunResult {
                head,
                seed,
                mae: t.mae,
                rmse: t.rmse,
                pearson: t.pearson,
                epsilon_error: t.epsilon_error,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let summary = config
        .heads
        .iter()
        .map(|&h| summarize(h, &runs.iter().filter(|r| r.head == h).collect::<Vec<_>>()))
        .collect();
    Ok(CompareReport {
        command: "compare",
        summary,
        runs,
        config: config.clone(),
    })
}

pub fn summary_csv(rows: &[HeadSummary]) -> String {
    let mut s = String::from(
        "head,seeds,mae_median,mae_min,mae_max,mae_spread,rmse_median,pearson_median,epsilon_median\n",
    );
    for r in rows {
        csv_line(
            &mut s,
            &[
                r.head.to_string(),
                r.seeds.to_string(),
                cell(Some(r.mae_median)),
                cell(Some(r.mae_min)),
                cell(Some(r.mae_max)),
                cell(Some(r.mae_spread)),
                cell(Some(r.rmse_median)),
                cell(r.pearson_median),
                cell(r.epsilon_median),
            ],
        );
    }
    s
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = super::resolve_config(&args.overrides)?;
    let report = cmd_compare(&config)?;
    write_text(&config.output.join("compare.csv"), &summary_csv(&report.summary))?;
    write_json(&config.output.join("compare.json"), &report)?;
    writeln!(out, "{:<8} {:>5} {:>12} {:>12} {:>12}", "head", "seeds", "mae_median", "mae_spread", "rmse_median")?;
    for r in &report.summary {
        writeln!(
            out,
            "{:<8} {:>5} {:>12.6} {:>12.6} {:>12.6}",
            r.head.name(),
            r.seeds,
            r.mae_median,
            r.mae_spread,
            r.rmse_median
        )?;
    }
    Ok(())
}
