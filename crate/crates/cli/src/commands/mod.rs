//! One module per subcommand. Each exposes a library entry point used by the
//! binary and by the integration tests.

pub mod compare;
pub mod encode;
pub mod eval;
pub mod gradcheck;
pub mod interpret;
pub mod train;

use std::path::Path;

use anyhow::Context;
use dldl_core::model::{Checkpoint, Model};

use crate::cli::Overrides;
use crate::config::{CsvSource, DataSource, RunConfig};

/// Loads `--config` (or the defaults) and applies the flag overrides.
pub fn resolve_config(o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut c = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(h) = o.head {
        c.head = h;
    }
    if let Some(h) = &o.heads {
        c.heads = h.clone();
    }
    if let Some(v) = o.lambda {
        c.lambda = v;
    }
    if let Some(v) = o.sigma {
        c.sigma = v;
    }
    if let Some(v) = o.grid {
        c.grid = v;
    }
    if let Some(v) = o.epochs {
        c.optimizer.epochs = v;
    }
    if let Some(v) = o.lr {
        c.optimizer.lr = v;
    }
    if let Some(v) = o.batch_size {
        c.optimizer.batch_size = v;
    }
    if let Some(v) = o.seed {
        c.seeds = vec![v];
    }
    if let Some(v) = &o.seeds {
        c.seeds = v.clone();
    }
    if let Some(p) = &o.data_csv {
        c.data = DataSource::Csv(CsvSource {
            path: p.clone(),
            test_path: o.test_csv.clone(),
        });
    }
    if let Some(v) = o.split_fraction {
        c.split_fraction = v;
    }
    if o.skip_zero_sigma {
        c.skip_zero_sigma = true;
    }
    if let Some(v) = &o.output {
        c.output = v.clone();
    }
    c.validate()?;
    Ok(c)
}

pub fn load_checkpoint(path: &Path) -> anyhow::Result<Model> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    let model = Checkpoint::from_json(&text)
        .and_then(Checkpoint::into_model)
        .with_context(|| format!("in checkpoint {}", path.display()))?;
    Ok(model)
}
