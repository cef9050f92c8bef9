//! Dense rectifier network used as the feature extractor, with explicit
//! forward and reverse-mode passes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Dense, DenseGrads};

/// Stack of affine layers; a rectifier follows every layer except the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations recorded by [`mlp_forward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `inputs[i]` is what layer `i` consumed.
    inputs: Vec<Vec<f64>>,
    /// `pre[i]` is layer `i`'s output before the rectifier.
    pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

impl MlpParams {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(MlpParams { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::out_dim)
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Dense::out_dim));
        dims
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGrads {
            layers: params.layers.iter().map(DenseGrads::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.layers.iter_mut().for_each(|l| l.scale(s));
    }
}

/// He-normal initialization (`std = sqrt(2 / fan_in)`), zero biases.
pub fn init_params(dims: &[usize], seed: u64) -> Result<MlpParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_params_with(dims, &mut rng)
}

pub(crate) fn init_params_with(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<MlpParams> {
    if dims.len() < 2 {
        return Err(Error::invalid("network dims need an input and at least one layer"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("network dims must be positive"));
    }
    let layers = dims
        .windows(2)
        .map(|w| Dense::random(w[1], w[0], std::f64::consts::SQRT_2, rng))
        .collect();
    MlpParams::new(layers)
}

pub fn mlp_forward(input: &[f64], params: &MlpParams) -> Result<(Vec<f64>, MlpCache)> {
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut x = input.to_vec();
    for (i, layer) in params.layers.iter().enumerate() {
        let z = layer.forward(&x)?;
        let next = if i + 1 < n {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        inputs.push(std::mem::replace(&mut x, next));
        pre.push(z);
    }
    Ok((x, MlpCache { inputs, pre }))
}

/// Reverse pass: parameter gradients and the gradient with respect to the input.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    d_features: &[f64],
) -> Result<(MlpGrads, Vec<f64>)> {
    let n = params.layers.len();
    if cache.pre.len() != n
        || d_features.len() != params.output_dim()
        || cache
            .pre
            .iter()
            .zip(&params.layers)
            .any(|(z, l)| z.len() != l.out_dim())
    {
        return Err(Error::invalid("forward cache does not match the network"));
    }
    let mut grads = Vec::with_capacity(n);
    let mut delta = d_features.to_vec();
    for i in (0..n).rev() {
        if i + 1 < n {
            for (d, z) in delta.iter_mut().zip(&cache.pre[i]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let (g, d_in) = params.layers[i].backward(&cache.inputs[i], &delta);
        grads.push(g);
        delta = d_in;
    }
    grads.reverse();
    Ok((MlpGrads { layers: grads }, delta))
}
