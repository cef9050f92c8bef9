//! Evaluation metrics over paired predictions and ground truths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when either side has zero variance.
    pub pearson: Option<f64>,
    /// Present only when every evaluated sample carries an annotation σ.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon_error: Option<f64>,
    /// Samples left out of the ε-error because their σ was zero.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon_skipped: Option<usize>,
}

fn check_pair(preds: &[f64], truths: &[f64]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    if preds.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            truths.len()
        )));
    }
    Ok(())
}

pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(preds, truths)?;
    let s: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum();
    Ok(s / preds.len() as f64)
}

pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(preds, truths)?;
    let s: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / preds.len() as f64).sqrt())
}

/// Mean of `1 - exp(-(ŷ - y)² / (2σ²))`.
pub fn epsilon_error(preds: &[f64], truths: &[f64], sigmas: &[f64]) -> Result<f64> {
    check_pair(preds, truths)?;
    if sigmas.len() != preds.len() {
        return Err(Error::invalid("one sigma per sample is required"));
    }
    if let Some(s) = sigmas.iter().find(|s| s.is_nan() || **s <= 0.0) {
        return Err(Error::invalid(format!("epsilon-error needs sigma > 0, got {s}")));
    }
    let s: f64 = preds
        .iter()
        .zip(truths)
        .zip(sigmas)
        .map(|((p, t), s)| 1.0 - (-(p - t) * (p - t) / (2.0 * s * s)).exp())
        .sum();
    Ok(s / preds.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(preds, truths)?;
    let n = preds.len() as f64;
    let mp = preds.iter().sum::<f64>() / n;
    let mt = truths.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
    for (p, t) in preds.iter().zip(truths) {
        let (a, b) = (p - mp, t - mt);
        cov += a * b;
        vp += a * a;
        vt += b * b;
    }
    if vp == 0.0 || vt == 0.0 {
        return Err(Error::DegenerateInput("Pearson correlation of a constant vector".into()));
    }
    Ok((cov / (vp.sqrt() * vt.sqrt())).clamp(-1.0, 1.0))
}

/// All metrics at once. `sigmas` entries of zero are skipped when `skip_zero_sigma`
/// is set, otherwise they are an error.
pub fn evaluate(
    preds: &[f64],
    truths: &[f64],
    sigmas: Option<&[f64]>,
    skip_zero_sigma: bool,
) -> Result<EvalReport> {
    let pearson = match pearson(preds, truths) {
        Ok(r) => Some(r),
        Err(Error::DegenerateInput(_)) => None,
        Err(e) => return Err(e),
    };
    let (epsilon_error, epsilon_skipped) = match sigmas {
        None => (None, None),
        Some(s) if skip_zero_sigma => {
            let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 0.0).collect();
            let skipped = s.len() - keep.len();
            let eps = if keep.is_empty() {
                None
            } else {
                let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
                Some(epsilon_error(&pick(preds), &pick(truths), &pick(s))?)
            };
            (eps, Some(skipped))
        }
        Some(s) => (Some(epsilon_error(preds, truths, s)?), None),
    };
    Ok(EvalReport {
        n: preds.len(),
        mae: mae(preds, truths)?,
        rmse: rmse(preds, truths)?,
        pearson,
        epsilon_error,
        epsilon_skipped,
    })
}
