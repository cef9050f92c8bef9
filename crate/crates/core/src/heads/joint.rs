//! Label-distribution learning jointly with expectation regression.
//!
//! Forward: `x = W f + b`, `p̂ = softmax(x)`, `ŷ = Σ p̂_k l_k`,
//! `L = L_ld + λ |ŷ - y|` with `L_ld = KL(p ‖ p̂)` against the Gaussian target `p`.
//! Backward: `∂L/∂x = (p̂ - p) + λ sign(ŷ - y) p̂ ∘ (l - ŷ)`.

use serde::{Deserialize, Serialize};

use super::{HeadGradients, HeadParams};
use crate::error::{Error, Result};
use crate::label::{encode_distribution, Distribution};

/// Probabilities are clamped to this inside logarithms.
pub const LOG_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLossConfig {
    /// Weight of the expectation-regression term.
    pub lambda: f64,
    /// Standard deviation of the Gaussian target distribution.
    pub sigma: f64,
    /// Whether the KL term enters the objective. Off only for the ER-only baseline.
    #[serde(default = "default_true")]
    pub distribution_term: bool,
}

fn default_true() -> bool {
    true
}

impl JointLossConfig {
    pub fn joint(lambda: f64, sigma: f64) -> Result<Self> {
        let c = JointLossConfig {
            lambda,
            sigma,
            distribution_term: true,
        };
        c.validate()?;
        Ok(c)
    }

    /// KL term only (`λ = 0`).
    pub fn dldl(sigma: f64) -> Result<Self> {
        Self::joint(0.0, sigma)
    }

    /// Expectation-regression term only.
    pub fn er_only(sigma: f64) -> Result<Self> {
        let c = JointLossConfig {
            lambda: 1.0,
            sigma,
            distribution_term: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// `x = W f + b`.
pub fn head_forward(features: &[f64], params: &HeadParams) -> Result<Vec<f64>> {
    params.layer.forward(features)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input contains non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

/// `Σ_k p_k l_k`, clamped onto `[l_min, l_max]` against rounding.
pub fn expectation(dist: &Distribution) -> f64 {
    let space = dist.space();
    let mean: f64 = dist
        .probs()
        .iter()
        .zip(space.labels())
        .map(|(p, l)| p * l)
        .sum();
    mean.clamp(space.l_min(), space.l_max())
}

/// `KL(target ‖ pred) = Σ p_k ln(p_k / p̂_k)` with `0 ln 0 = 0`.
pub fn kl_loss(target: &Distribution, pred: &Distribution) -> Result<f64> {
    if target.space() != pred.space() {
        return Err(Error::invalid("KL between distributions on different grids"));
    }
    let mut total = 0.0;
    for (k, (&p, &q)) in target.probs().iter().zip(pred.probs()).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::NumericalDomain(format!(
                "predicted probability at label index {k} is exactly zero where the target is {p}"
            )));
        }
        total += p * (p.ln() - q.max(LOG_FLOOR).ln());
    }
    Ok(total)
}

/// `|ŷ - y|`.
pub fn er_loss(y_hat: f64, y: f64) -> f64 {
    (y_hat - y).abs()
}

/// Everything the backward pass needs from [`joint_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointForward {
    pub features: Vec<f64>,
    pub y: f64,
    pub logits: Vec<f64>,
    pub target: Distribution,
    pub pred: Distribution,
    pub y_hat: f64,
    /// `L_ld + λ L_er`, or `λ L_er` when the distribution term is disabled.
    pub loss: f64,
    /// KL term. May be `None` when the distribution term is disabled and KL is undefined.
    pub ld: Option<f64>,
    pub er: f64,
}

pub fn joint_forward(
    features: &[f64],
    params: &HeadParams,
    y: f64,
    config: &JointLossConfig,
) -> Result<JointForward> {
    config.validate()?;
    let logits = head_forward(features, params)?;
    let pred = Distribution::new_unchecked(params.space.clone(), softmax(&logits)?);
    let target = encode_distribution(y, config.sigma, &params.space)?;
    let y_hat = expectation(&pred);
    let er = er_loss(y_hat, y);
    let (loss, ld) = if config.distribution_term {
        let ld = kl_loss(&target, &pred)?;
        (ld + config.lambda * er, Some(ld))
    } else {
        (config.lambda * er, kl_loss(&target, &pred).ok())
    };
    Ok(JointForward {
        features: features.to_vec(),
        y,
        logits,
        target,
        pred,
        y_hat,
        loss,
        ld,
        er,
    })
}

/// `sign` with `sign(0) = 0`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn joint_d_logits(
    pred: &[f64],
    target: &[f64],
    labels: &[f64],
    y_hat: f64,
    y: f64,
    config: &JointLossConfig,
) -> Vec<f64> {
    let s = config.lambda * sign(y_hat - y);
    pred.iter()
        .zip(target)
        .zip(labels)
        .map(|((&q, &p), &l)| {
            let er = s * q * (l - y_hat);
            if config.distribution_term {
                (q - p) + er
            } else {
                er
            }
        })
        .collect()
}

pub fn joint_backward(
    features: &[f64],
    params: &HeadParams,
    y: f64,
    config: &JointLossConfig,
    cache: &JointForward,
) -> Result<HeadGradients> {
    if cache.features != features || cache.y != y || cache.logits.len() != params.space.len() {
        return Err(Error::invalid("forward cache does not match the backward inputs"));
    }
    let d_logits = joint_d_logits(
        cache.pred.probs(),
        cache.target.probs(),
        params.space.labels(),
        cache.y_hat,
        y,
        config,
    );
    Ok(HeadGradients::through(&params.layer, features, d_logits))
}

/// Builds logits whose softmax is `dist`, shifted by `offset`.
pub fn logits_for(dist: &Distribution, offset: f64) -> Vec<f64> {
    dist.probs().iter().map(|p| p.max(LOG_FLOOR).ln() + offset).collect()
}
