//! A backbone plus one output head, with the per-sample loss/gradient used by
//! training and a JSON checkpoint format.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{init_params_with, mlp_backward, mlp_forward, MlpGrads, MlpParams};
use crate::error::{Error, Result};
use crate::heads::joint::joint_d_logits;
use crate::heads::{
    dex_backward, dex_inference, dex_loss, expectation, head_forward, joint_forward, mr_backward,
    mr_forward, mr_loss, mr_unscale, ranking_backward, ranking_inference, ranking_loss_from_logits,
    scale_target, softmax, HeadGradients, HeadParams, JointLossConfig, MrNorm, MrParams,
    RankingHeadParams,
};
use crate::label::{encode_ranking, Distribution, GridSpec, LabelSpace};
use crate::linalg::{Dense, DenseGrads, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Joint,
    Dldl,
    Er,
    MrL1,
    MrL2,
    Dex,
    Ranking,
}

impl HeadKind {
    pub const ALL: [HeadKind; 7] = [
        HeadKind::Joint,
        HeadKind::Dldl,
        HeadKind::Er,
        HeadKind::MrL1,
        HeadKind::MrL2,
        HeadKind::Dex,
        HeadKind::Ranking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Joint => "joint",
            HeadKind::Dldl => "dldl",
            HeadKind::Er => "er",
            HeadKind::MrL1 => "mr_l1",
            HeadKind::MrL2 => "mr_l2",
            HeadKind::Dex => "dex",
            HeadKind::Ranking => "ranking",
        }
    }

    /// Loss settings for the heads built on the softmax distribution.
    pub fn loss_config(self, lambda: f64, sigma: f64) -> Option<Result<JointLossConfig>> {
        match self {
            HeadKind::Joint => Some(JointLossConfig::joint(lambda, sigma)),
            HeadKind::Dldl => Some(JointLossConfig::dldl(sigma)),
            HeadKind::Er => Some(JointLossConfig::er_only(sigma)),
            _ => None,
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeadKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown head {s:?}; expected one of joint, dldl, er, mr_l1, mr_l2, dex, ranking"
                ))
            })
    }
}

/// Everything needed to build a model apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub head: HeadKind,
    /// Backbone widths, input first. The last entry is the feature dimension.
    pub dims: Vec<usize>,
    pub grid: LabelSpace,
    pub lambda: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Joint, DLDL-only and ER-only heads share this variant.
    Distribution {
        params: HeadParams,
        loss: JointLossConfig,
    },
    Mr {
        params: MrParams,
        norm: MrNorm,
    },
    Dex(HeadParams),
    Ranking(RankingHeadParams),
}

impl Head {
    fn build(kind: HeadKind, layer: Dense, space: LabelSpace, lambda: f64, sigma: f64) -> Result<Head> {
        Ok(match kind {
            HeadKind::Joint | HeadKind::Dldl | HeadKind::Er => Head::Distribution {
                params: HeadParams::new(layer, space)?,
                loss: kind.loss_config(lambda, sigma).expect("distribution head")?,
            },
            HeadKind::MrL1 | HeadKind::MrL2 => Head::Mr {
                params: MrParams::new(layer, space)?,
                norm: if kind == HeadKind::MrL1 { MrNorm::L1 } else { MrNorm::L2 },
            },
            HeadKind::Dex => Head::Dex(HeadParams::new(layer, space)?),
            HeadKind::Ranking => Head::Ranking(RankingHeadParams::new(layer, space)?),
        })
    }

    pub fn layer(&self) -> &Dense {
        match self {
            Head::Distribution { params, .. } | Head::Dex(params) => &params.layer,
            Head::Mr { params, .. } => &params.layer,
            Head::Ranking(params) => &params.layer,
        }
    }

    pub fn layer_mut(&mut self) -> &mut Dense {
        match self {
            Head::Distribution { params, .. } | Head::Dex(params) => &mut params.layer,
            Head::Mr { params, .. } => &mut params.layer,
            Head::Ranking(params) => &mut params.layer,
        }
    }
}

fn head_rows(kind: HeadKind, space: &LabelSpace) -> usize {
    match kind {
        HeadKind::MrL1 | HeadKind::MrL2 => 1,
        HeadKind::Ranking => space.len() - 1,
        _ => space.len(),
    }
}

/// Loss terms for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLoss {
    pub loss: f64,
    /// KL term, for the distribution heads when it is defined.
    pub ld: Option<f64>,
    /// `|ŷ - y|`, for the distribution heads.
    pub er: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub backbone: MlpGrads,
    pub head: DenseGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &Model) -> Self {
        ModelGrads {
            backbone: MlpGrads::zeros_like(&model.backbone),
            head: DenseGrads::zeros_like(model.head.layer()),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        self.backbone.add_assign(&other.backbone);
        self.head.add_assign(&other.head);
    }

    pub fn scale(&mut self, s: f64) {
        self.backbone.scale(s);
        self.head.scale(s);
    }

    /// Tensors in the order of [`Model::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in &self.backbone.layers {
            out.push(g.weight.as_slice());
            out.push(&g.bias);
        }
        out.push(self.head.weight.as_slice());
        out.push(&self.head.bias);
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub seed: u64,
    pub backbone: MlpParams,
    pub head: Head,
}

/// Small head weights make the untrained prediction close to uniform over the
/// grid (and close to zero for the regression heads).
pub const HEAD_INIT_GAIN: f64 = 0.01;

impl Model {
    /// He-initialized backbone, then a head drawn with
    /// `std = HEAD_INIT_GAIN/sqrt(fan_in)`, both from one stream seeded by `seed`. Biases start at zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Model> {
        if spec.dims.len() < 2 {
            return Err(Error::invalid("backbone dims need an input and at least one layer"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = init_params_with(&spec.dims, &mut rng)?;
        let d = *spec.dims.last().expect("checked above");
        let layer = Dense::random(head_rows(spec.head, &spec.grid), d, HEAD_INIT_GAIN, &mut rng);
        Self::from_parts(spec.clone(), seed, backbone, layer)
    }

    pub fn from_parts(spec: ModelSpec, seed: u64, backbone: MlpParams, layer: Dense) -> Result<Model> {
        if backbone.dims() != spec.dims {
            return Err(Error::invalid(format!(
                "backbone dims {:?} disagree with spec {:?}",
                backbone.dims(),
                spec.dims
            )));
        }
        if layer.in_dim() != backbone.output_dim() {
            return Err(Error::invalid("head input does not match the backbone output"));
        }
        let head = Head::build(spec.head, layer, spec.grid.clone(), spec.lambda, spec.sigma)?;
        Ok(Model {
            spec,
            seed,
            backbone,
            head,
        })
    }

    pub fn kind(&self) -> HeadKind {
        self.spec.head
    }

    pub fn space(&self) -> &LabelSpace {
        &self.spec.grid
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.input_dim()
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(mlp_forward(x, &self.backbone)?.0)
    }

    /// Predicted label distribution, for heads that produce one.
    pub fn predict_distribution(&self, x: &[f64]) -> Result<Option<Distribution>> {
        let f = self.features(x)?;
        match &self.head {
            Head::Distribution { params, .. } | Head::Dex(params) => {
                let p = softmax(&head_forward(&f, params)?)?;
                Ok(Some(Distribution::new_unchecked(params.space.clone(), p)))
            }
            _ => Ok(None),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let f = self.features(x)?;
        let y = match &self.head {
            Head::Distribution { params, .. } => {
                let p = softmax(&head_forward(&f, params)?)?;
                expectation(&Distribution::new_unchecked(params.space.clone(), p))
            }
            Head::Dex(params) => {
                let p = softmax(&head_forward(&f, params)?)?;
                dex_inference(&Distribution::new_unchecked(params.space.clone(), p))
            }
            Head::Mr { params, .. } => mr_unscale(mr_forward(&f, params)?, &params.space),
            Head::Ranking(params) => {
                let logits = params.layer.forward(&f)?;
                let outputs: Vec<f64> = logits.iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect();
                ranking_inference(&outputs, &params.space)
            }
        };
        if !y.is_finite() {
            return Err(Error::NonFinite("prediction".into()));
        }
        Ok(y)
    }

    pub fn loss(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(self.loss_and_grad(x, y)?.0.loss)
    }

    pub fn loss_and_grad(&self, x: &[f64], y: f64) -> Result<(SampleLoss, ModelGrads)> {
        self.loss_and_grad_with(x, y, 1.0)
    }

    /// `er_sign` multiplies the regression term of the distribution-head derivative
    /// only; anything but 1 yields a deliberately wrong gradient for mutation tests.
    pub(crate) fn loss_and_grad_with(
        &self,
        x: &[f64],
        y: f64,
        er_sign: f64,
    ) -> Result<(SampleLoss, ModelGrads)> {
        let (f, cache) = mlp_forward(x, &self.backbone)?;
        let (sample, hg): (SampleLoss, HeadGradients) = match &self.head {
            Head::Distribution { params, loss } => {
                let fw = joint_forward(&f, params, y, loss)?;
                let cfg = JointLossConfig {
                    lambda: loss.lambda * er_sign,
                    ..*loss
                };
                let d = joint_d_logits(
                    fw.pred.probs(),
                    fw.target.probs(),
                    params.space.labels(),
                    fw.y_hat,
                    y,
                    &cfg,
                );
                let s = SampleLoss {
                    loss: fw.loss,
                    ld: fw.ld,
                    er: Some(fw.er),
                };
                (s, HeadGradients::through(&params.layer, &f, d))
            }
            Head::Mr { params, norm } => {
                let pred = mr_forward(&f, params)?;
                let ys = scale_target(y, &params.space);
                let s = SampleLoss {
                    loss: mr_loss(pred, ys, *norm),
                    ld: None,
                    er: None,
                };
                (s, mr_backward(&f, params, pred, ys, *norm)?)
            }
            Head::Dex(params) => {
                let logits = head_forward(&f, params)?;
                let s = SampleLoss {
                    loss: dex_loss(&logits, y, &params.space)?,
                    ld: None,
                    er: None,
                };
                (s, dex_backward(&f, params, &logits, y)?)
            }
            Head::Ranking(params) => {
                let logits = params.layer.forward(&f)?;
                let target = encode_ranking(y, &params.space)?;
                let s = SampleLoss {
                    loss: ranking_loss_from_logits(&logits, &target),
                    ld: None,
                    er: None,
                };
                (s, ranking_backward(&f, params, &logits, &target)?)
            }
        };
        if !sample.loss.is_finite() {
            return Err(Error::NonFinite(format!("loss for target {y}")));
        }
        let (bg, _) = mlp_backward(&self.backbone, &cache, &hg.d_features)?;
        Ok((
            sample,
            ModelGrads {
                backbone: bg,
                head: DenseGrads {
                    weight: hg.d_weight,
                    bias: hg.d_bias,
                },
            },
        ))
    }

    /// Lengths of the parameter tensors: each backbone weight and bias, then the head's.
    pub fn param_shapes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for l in &self.backbone.layers {
            out.push(l.weight.as_slice().len());
            out.push(l.bias.len());
        }
        out.push(self.head.layer().weight.as_slice().len());
        out.push(self.head.layer().bias.len());
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.backbone.layers {
            out.push(l.weight.as_mut_slice());
            out.push(&mut l.bias);
        }
        let h = self.head.layer_mut();
        out.push(h.weight.as_mut_slice());
        out.push(&mut h.bias);
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.backbone.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out.extend_from_slice(self.head.layer().weight.as_slice());
        out.extend_from_slice(&self.head.layer().bias);
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut rest = values;
        for s in self.param_slices_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.backbone.is_finite() && self.head.layer().is_finite()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            head: self.spec.head,
            lambda: self.spec.lambda,
            sigma: self.spec.sigma,
            grid: self.spec.grid.spec(),
            seed: self.seed,
            dims: self.spec.dims.clone(),
            backbone: self.backbone.clone(),
            head_layer: self.head.layer().clone(),
        }
    }
}

pub const CHECKPOINT_FORMAT: &str = "dldl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model record. Layer matrices are row-major `{rows, cols, data}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub head: HeadKind,
    pub lambda: f64,
    pub sigma: f64,
    pub grid: GridSpec,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub backbone: MlpParams,
    pub head_layer: Dense,
}

fn checked_dense(d: &Dense, what: &str) -> Result<Dense> {
    let w = Matrix::from_vec(d.weight.rows(), d.weight.cols(), d.weight.as_slice().to_vec())
        .map_err(|e| Error::invalid(format!("{what}: {e}")))?;
    let layer = Dense::new(w, d.bias.clone()).map_err(|e| Error::invalid(format!("{what}: {e}")))?;
    if !layer.is_finite() {
        return Err(Error::NonFinite(format!("{what} parameters")));
    }
    Ok(layer)
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("malformed checkpoint: {e}")))
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let grid = LabelSpace::try_from(self.grid)?;
        let layers = self
            .backbone
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| checked_dense(l, &format!("backbone layer {i}")))
            .collect::<Result<Vec<_>>>()?;
        let backbone = MlpParams::new(layers)?;
        let head = checked_dense(&self.head_layer, "head layer")?;
        let spec = ModelSpec {
            head: self.head,
            dims: self.dims,
            grid,
            lambda: self.lambda,
            sigma: self.sigma,
        };
        Model::from_parts(spec, self.seed, backbone, head)
    }
}
