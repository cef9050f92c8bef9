//! Output heads on top of a feature vector.
//!
//! [`joint`] holds the label-distribution + expectation-regression head and its
//! analytic gradients. [`baselines`] holds the metric regression, DEX and
//! multi-output ranking heads used for ablations.

pub mod baselines;
pub mod joint;

use crate::label::LabelSpace;
use crate::linalg::{Dense, Matrix};

pub use baselines::{
    dex_backward, dex_class, dex_inference, dex_loss, mr_backward, mr_forward, mr_loss, mr_unscale,
    ranking_backward, ranking_forward, ranking_inference, ranking_loss, ranking_loss_from_logits,
    scale_target, MrNorm, MrParams, RankingHeadParams,
};
pub use joint::{
    er_loss, expectation, head_forward, joint_backward, joint_forward, kl_loss, softmax,
    JointForward, JointLossConfig, LOG_FLOOR,
};

use crate::error::{Error, Result};

/// Final linear map producing `K` logits from a `d`-dimensional feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub layer: Dense,
    pub space: LabelSpace,
}

impl HeadParams {
    pub fn new(layer: Dense, space: LabelSpace) -> Result<Self> {
        if layer.out_dim() != space.len() {
            return Err(Error::invalid(format!(
                "head has {} rows but the grid has {} labels",
                layer.out_dim(),
                space.len()
            )));
        }
        Ok(HeadParams { layer, space })
    }

    pub fn feature_dim(&self) -> usize {
        self.layer.in_dim()
    }
}

/// Gradients of a head's loss with respect to its logits, parameters and input features.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub d_logits: Vec<f64>,
    pub d_weight: Matrix,
    pub d_bias: Vec<f64>,
    pub d_features: Vec<f64>,
}

impl HeadGradients {
    /// Chains `d_logits` through the affine layer `layer` evaluated at `features`.
    pub fn through(layer: &Dense, features: &[f64], d_logits: Vec<f64>) -> Self {
        let (g, d_features) = layer.backward(features, &d_logits);
        HeadGradients {
            d_logits,
            d_weight: g.weight,
            d_bias: g.bias,
            d_features,
        }
    }
}
