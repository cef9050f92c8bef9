//! Single-stage baselines: metric regression (tanh output, ℓ1/ℓ2), DEX
//! (cross-entropy over label classes, expectation at inference) and the
//! multi-output ranking head (K-1 sigmoid thresholds, jointly trained).

use serde::{Deserialize, Serialize};

use super::joint::{expectation, sign, softmax, LOG_FLOOR};
use super::{HeadGradients, HeadParams};
use crate::error::{Error, Result};
use crate::label::{Distribution, LabelSpace, RankingVector};
use crate::linalg::Dense;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MrNorm {
    L1,
    L2,
}

/// Single-output linear layer followed by `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrParams {
    pub layer: Dense,
    pub space: LabelSpace,
}

impl MrParams {
    pub fn new(layer: Dense, space: LabelSpace) -> Result<Self> {
        if layer.out_dim() != 1 {
            return Err(Error::invalid("metric regression head must have one output"));
        }
        Ok(MrParams { layer, space })
    }
}

/// Affine map of `[l_min, l_max]` onto `[-1, 1]`.
pub fn scale_target(y: f64, space: &LabelSpace) -> f64 {
    2.0 * (y - space.l_min()) / space.range() - 1.0
}

/// Inverse of [`scale_target`].
pub fn mr_unscale(pred: f64, space: &LabelSpace) -> f64 {
    space.l_min() + 0.5 * (pred + 1.0) * space.range()
}

pub fn mr_forward(features: &[f64], params: &MrParams) -> Result<f64> {
    Ok(params.layer.forward(features)?[0].tanh())
}

pub fn mr_loss(pred: f64, y_scaled: f64, norm: MrNorm) -> f64 {
    let r = pred - y_scaled;
    match norm {
        MrNorm::L1 => r.abs(),
        MrNorm::L2 => r * r,
    }
}

pub fn mr_backward(
    features: &[f64],
    params: &MrParams,
    pred: f64,
    y_scaled: f64,
    norm: MrNorm,
) -> Result<HeadGradients> {
    if features.len() != params.layer.in_dim() {
        return Err(Error::invalid("feature length does not match the regression head"));
    }
    let r = pred - y_scaled;
    let d_pred = match norm {
        MrNorm::L1 => sign(r),
        MrNorm::L2 => 2.0 * r,
    };
    let d_logit = d_pred * (1.0 - pred * pred);
    Ok(HeadGradients::through(&params.layer, features, vec![d_logit]))
}

/// Class index of `y`: nearest grid point, ties toward the lower index.
pub fn dex_class(y: f64, space: &LabelSpace) -> usize {
    space.nearest_index(y)
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Cross-entropy `-ln p̂_{k(y)}` evaluated in log-space.
pub fn dex_loss(logits: &[f64], y: f64, space: &LabelSpace) -> Result<f64> {
    if logits.len() != space.len() {
        return Err(Error::invalid("DEX logits do not match the grid"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("DEX logits contain non-finite values"));
    }
    Ok(log_sum_exp(logits) - logits[dex_class(y, space)])
}

pub fn dex_backward(features: &[f64], params: &HeadParams, logits: &[f64], y: f64) -> Result<HeadGradients> {
    let mut d = softmax(logits)?;
    d[dex_class(y, &params.space)] -= 1.0;
    Ok(HeadGradients::through(&params.layer, features, d))
}

/// Expected label under the predicted class probabilities.
pub fn dex_inference(pred: &Distribution) -> f64 {
    expectation(pred)
}

/// `K - 1` sigmoid threshold classifiers on a shared feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingHeadParams {
    pub layer: Dense,
    pub space: LabelSpace,
}

impl RankingHeadParams {
    pub fn new(layer: Dense, space: LabelSpace) -> Result<Self> {
        if layer.out_dim() + 1 != space.len() {
            return Err(Error::invalid(format!(
                "ranking head has {} outputs, grid needs {}",
                layer.out_dim(),
                space.len() - 1
            )));
        }
        Ok(RankingHeadParams { layer, space })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn ranking_forward(features: &[f64], params: &RankingHeadParams) -> Result<Vec<f64>> {
    Ok(params.layer.forward(features)?.into_iter().map(sigmoid).collect())
}

/// Sum of binary cross-entropies between sigmoid outputs and the target thresholds.
pub fn ranking_loss(outputs: &[f64], target: &RankingVector) -> f64 {
    outputs
        .iter()
        .zip(&target.values)
        .map(|(&o, &t)| {
            -(t * o.max(LOG_FLOOR).ln() + (1.0 - t) * (1.0 - o).max(LOG_FLOOR).ln())
        })
        .sum()
}

/// Same loss as [`ranking_loss`], computed from the logits as `softplus(z) - t z`,
/// which keeps full precision when outputs saturate.
pub fn ranking_loss_from_logits(logits: &[f64], target: &RankingVector) -> f64 {
    logits
        .iter()
        .zip(&target.values)
        .map(|(&z, &t)| softplus(z) - t * z)
        .sum()
}

pub fn ranking_backward(
    features: &[f64],
    params: &RankingHeadParams,
    logits: &[f64],
    target: &RankingVector,
) -> Result<HeadGradients> {
    if logits.len() != target.values.len() || logits.len() != params.layer.out_dim() {
        return Err(Error::invalid("ranking logits and target lengths disagree"));
    }
    let d = logits
        .iter()
        .zip(&target.values)
        .map(|(&z, &t)| sigmoid(z) - t)
        .collect();
    Ok(HeadGradients::through(&params.layer, features, d))
}

/// `ŷ = l_{i*}` with `i* = 1 + #{k : output_k > 0.5}` (one-based).
pub fn ranking_inference(outputs: &[f64], space: &LabelSpace) -> f64 {
    let passed = outputs.iter().filter(|&&o| o > 0.5).count();
    space.labels()[passed.min(space.len() - 1)]
}
