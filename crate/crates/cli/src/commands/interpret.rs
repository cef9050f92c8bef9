use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use dldl_core::heads::{head_forward, softmax, HeadParams};
use dldl_core::interpret::{
    cell_means, class_activation_maps, occlusion_sensitivity, score_map, write_matrix_csv, OcclusionGrid,
    ScoreMap,
};
use dldl_core::model::{Head, Model};
use dldl_core::pool::{global_avg_pool, FeatureMap};

use crate::cli::{InterpretArgs, InterpretMode};
use crate::config::RunConfig;

fn head_params(model: &Model) -> anyhow::Result<&HeadParams> {
    match &model.head {
        Head::Distribution { params, .. } | Head::Dex(params) => Ok(params),
        _ => bail!("score maps need a softmax head (joint, dldl, er or dex), not {}", model.kind()),
    }
}

/// Treats `maps` as backbone feature maps: `p̂` comes from the head applied to their
/// global average, and the score map weights the class activation maps by `p̂`.
pub fn cmd_scoremap(model: &Model, maps: &FeatureMap) -> anyhow::Result<ScoreMap> {
    let params = head_params(model)?;
    let p = softmax(&head_forward(&global_avg_pool(maps), params)?)?;
    let a = class_activation_maps(maps, params)?;
    Ok(score_map(&a, &p)?)
}

pub fn load_maps(path: &Path) -> anyhow::Result<FeatureMap> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let m: FeatureMap = serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(m.validated()?)
}

/// Occludes the test split with the training split's per-cell means.
pub fn cmd_occlusion(
    model: &Model,
    config: &RunConfig,
    grid: (usize, usize),
    mask: (usize, usize),
    stride: usize,
) -> anyhow::Result<OcclusionGrid> {
    if grid.0 * grid.1 != model.input_dim() {
        bail!(
            "grid {}x{} has {} cells but the model takes {} inputs",
            grid.0,
            grid.1,
            grid.0 * grid.1,
            model.input_dim()
        );
    }
    let (tr, te) = config.load_data()?;
    let fill = cell_means(&tr.samples.iter().map(|s| s.features.clone()).collect::<Vec<_>>())?;
    let inputs: Vec<Vec<f64>> = te.samples.iter().map(|s| s.features.clone()).collect();
    Ok(occlusion_sensitivity(
        |x| model.predict(x),
        &inputs,
        &te.targets(),
        grid,
        mask,
        stride,
        &fill,
    )?)
}

pub fn run(args: &InterpretArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = super::load_checkpoint(&args.checkpoint)?;
    let path = args.overrides.output.as_deref().context("--output is required")?;
    match args.mode {
        InterpretMode::Scoremap => {
            let maps = load_maps(args.maps.as_deref().context("--maps is required")?)?;
            let s = cmd_scoremap(&model, &maps)?;
            write_matrix_csv(path, &s.values)?;
            writeln!(out, "score map {}x{} -> {}", s.height, s.width, path.display())?;
        }
        InterpretMode::Occlusion => {
            let config = super::resolve_config(&args.overrides)?;
            let grid = args.grid_shape.context("--grid-shape is required")?;
            let g = cmd_occlusion(&model, &config, grid, args.mask, args.stride)?;
            write_matrix_csv(path, &g.relative_loss)?;
            writeln!(
                out,
                "occlusion {}x{} positions, clean mae {:.6} -> {}",
                g.relative_loss.rows(),
                g.relative_loss.cols(),
                g.clean_mae,
                path.display()
            )?;
        }
    }
    Ok(())
}
