//! Run configuration: a JSON document, every field optional, with CLI flags
//! layered on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dldl_core::data::{gen_synthetic, load_csv, split, Dataset, SynthConfig};
use dldl_core::model::{HeadKind, ModelSpec};
use dldl_core::optim::{AdamConfig, StepSchedule};
use dldl_core::train::TrainConfig;
use dldl_core::{GridSpec, LabelSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: u32,
    pub batch_size: usize,
    /// The learning rate is divided by `decay_factor` every `decay_every` epochs.
    pub decay_every: u32,
    pub decay_factor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let sched = StepSchedule::default();
        OptimizerConfig {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            epochs: 60,
            batch_size: 64,
            decay_every: sched.every,
            decay_factor: sched.factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Held-out file. Without it the main file is split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub head: HeadKind,
    /// Heads compared by `compare`.
    pub heads: Vec<HeadKind>,
    pub lambda: f64,
    pub sigma: f64,
    pub grid: GridSpec,
    /// Backbone widths, input first.
    pub backbone_dims: Vec<usize>,
    pub optimizer: OptimizerConfig,
    pub data: DataSource,
    pub split_fraction: f64,
    pub split_seed: u64,
    /// `train` uses the first seed; `compare` uses all of them.
    pub seeds: Vec<u64>,
    pub skip_zero_sigma: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            head: HeadKind::Joint,
            heads: vec![HeadKind::Joint, HeadKind::Dldl, HeadKind::Er, HeadKind::MrL2, HeadKind::Dex],
            lambda: 1.0,
            sigma: 2.0,
            grid: GridSpec {
                min: 0.0,
                max: 100.0,
                step: 1.0,
            },
            backbone_dims: vec![16, 64, 64],
            optimizer: OptimizerConfig::default(),
            data: DataSource::Synthetic(SynthConfig::default()),
            split_fraction: 0.8,
            split_seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            skip_zero_sigma: false,
            output: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).context("invalid run configuration")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn space(&self) -> anyhow::Result<LabelSpace> {
        Ok(LabelSpace::try_from(self.grid)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.space()?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            bail!("sigma must be positive, got {}", self.sigma);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!("lambda must be non-negative, got {}", self.lambda);
        }
        if self.backbone_dims.len() < 2 || self.backbone_dims.contains(&0) {
            bail!("backbone_dims needs at least two positive widths");
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        let o = &self.optimizer;
        if !(o.lr.is_finite() && o.lr > 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            bail!("optimizer needs lr > 0 and betas in [0, 1)");
        }
        if !(o.epsilon.is_finite() && o.epsilon > 0.0) || o.batch_size == 0 || o.decay_every == 0 || !(o.decay_factor.is_finite() && o.decay_factor >= 1.0) {
            bail!("optimizer needs epsilon > 0, batch_size > 0, decay_every > 0, decay_factor >= 1");
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
            if s.dim != self.backbone_dims[0] {
                bail!(
                    "synthetic data has {} features but backbone_dims starts with {}",
                    s.dim,
                    self.backbone_dims[0]
                );
            }
        }
        Ok(())
    }

    pub fn model_spec(&self, head: HeadKind) -> anyhow::Result<ModelSpec> {
        Ok(ModelSpec {
            head,
            dims: self.backbone_dims.clone(),
            grid: self.space()?,
            lambda: self.lambda,
            sigma: self.sigma,
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let o = &self.optimizer;
        TrainConfig {
            optimizer: AdamConfig {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                epsilon: o.epsilon,
            },
            epochs: o.epochs,
            batch_size: o.batch_size,
            schedule: StepSchedule {
                every: o.decay_every,
                factor: o.decay_factor,
            },
            shuffle_seed: seed,
        }
    }

    /// `(train, test)` according to the data source and split settings.
    pub fn load_data(&self) -> anyhow::Result<(Dataset, Dataset)> {
        let space = self.space()?;
        let (train, test) = match &self.data {
            DataSource::Synthetic(s) => split(&gen_synthetic(s, &space)?, self.split_fraction, self.split_seed)?,
            DataSource::Csv(c) => {
                let main = load_csv(&c.path, &space)?;
                match &c.test_path {
                    Some(t) => (main, load_csv(t, &space)?),
                    None => split(&main, self.split_fraction, self.split_seed)?,
                }
            }
        };
        if train.dim() != self.backbone_dims[0] || test.dim() != self.backbone_dims[0] {
            bail!(
                "data has {} features but backbone_dims starts with {}",
                train.dim(),
                self.backbone_dims[0]
            );
        }
        Ok((train, test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_is_field_exact() {
        let mut c = RunConfig::default();
        c.head = HeadKind::MrL1;
        c.lambda = 0.1 + 0.2;
        c.data = DataSource::Csv(CsvSource {
            path: "a.csv".into(),
            test_path: Some("b.csv".into()),
        });
        c.seeds = vec![7, u64::MAX];
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"lamda": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"head": "svm"}"#).is_err());
        let bad = RunConfig {
            sigma: 0.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            backbone_dims: vec![8, 4],
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig::from_json(r#"{"grid": {"min": 0, "max": 10, "step": 3}}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
