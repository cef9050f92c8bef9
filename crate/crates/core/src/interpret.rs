//! Class activation maps, score maps, and occlusion sensitivity sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heads::HeadParams;
use crate::linalg::Matrix;
use crate::metrics::mae;
use crate::pool::FeatureMap;

/// `A^k = Σ_j w_kj F^j + b_k` per pixel, returned as a `K`-channel map.
pub fn class_activation_maps(maps: &FeatureMap, params: &HeadParams) -> Result<FeatureMap> {
    let w = &params.layer.weight;
    if maps.channels() != w.cols() {
        return Err(Error::invalid(format!(
            "feature map has {} channels, head expects {}",
            maps.channels(),
            w.cols()
        )));
    }
    let plane = maps.height() * maps.width();
    let mut out = Vec::with_capacity(w.rows() * plane);
    for k in 0..w.rows() {
        let mut a = vec![params.layer.bias[k]; plane];
        for j in 0..w.cols() {
            let wkj = w.get(k, j);
            for (v, f) in a.iter_mut().zip(maps.channel(j)) {
                *v += wkj * f;
            }
        }
        out.extend(a);
    }
    FeatureMap::new(w.rows(), maps.height(), maps.width(), out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub values: Matrix,
}

/// `S = Σ_k p̂_k A^k`.
pub fn score_map(activations: &FeatureMap, probs: &[f64]) -> Result<ScoreMap> {
    if activations.channels() != probs.len() {
        return Err(Error::invalid(format!(
            "{} activation maps for {} probabilities",
            activations.channels(),
            probs.len()
        )));
    }
    let (h, w) = (activations.height(), activations.width());
    let mut s = vec![0.0; h * w];
    for (k, &p) in probs.iter().enumerate() {
        for (v, a) in s.iter_mut().zip(activations.channel(k)) {
            *v += p * a;
        }
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("score map".into()));
    }
    Ok(ScoreMap {
        height: h,
        width: w,
        values: Matrix::from_vec(h, w, s)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionGrid {
    /// Occluder `(height, width)`.
    pub mask_shape: (usize, usize),
    pub stride: usize,
    pub clean_mae: f64,
    /// `(MAE_occluded - MAE_clean) / MAE_clean` per mask position.
    pub relative_loss: Matrix,
}

/// Number of mask positions along each axis.
pub fn occlusion_positions(
    grid: (usize, usize),
    mask: (usize, usize),
    stride: usize,
) -> Result<(usize, usize)> {
    if stride == 0 || mask.0 == 0 || mask.1 == 0 {
        return Err(Error::invalid("mask and stride must be positive"));
    }
    if mask.0 > grid.0 || mask.1 > grid.1 {
        return Err(Error::invalid(format!(
            "mask {}x{} does not fit in grid {}x{}",
            mask.0, mask.1, grid.0, grid.1
        )));
    }
    Ok(((grid.0 - mask.0) / stride + 1, (grid.1 - mask.1) / stride + 1))
}

/// Per-cell mean over a set of equally shaped inputs.
pub fn cell_means(inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::invalid("cell means need at least one input"))?;
    let mut acc = vec![0.0; first.len()];
    for x in inputs {
        if x.len() != acc.len() {
            return Err(Error::invalid("inputs differ in size"));
        }
        acc.iter_mut().zip(x).for_each(|(a, v)| *a += v);
    }
    let n = inputs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Slides a `mask` over row-major `grid`-shaped inputs, replacing covered cells by
/// `fill`, and records the relative MAE degradation of `predict` at each position.
pub fn occlusion_sensitivity<F>(
    predict: F,
    inputs: &[Vec<f64>],
    targets: &[f64],
    grid: (usize, usize),
    mask: (usize, usize),
    stride: usize,
    fill: &[f64],
) -> Result<OcclusionGrid>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let (rows, cols) = occlusion_positions(grid, mask, stride)?;
    let cells = grid.0 * grid.1;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::invalid("need one target per input and at least one input"));
    }
    if fill.len() != cells || inputs.iter().any(|x| x.len() != cells) {
        return Err(Error::invalid(format!("inputs and fill must have {cells} cells")));
    }
    let run = |xs: &mut dyn Iterator<Item = Result<f64>>| -> Result<f64> {
        let preds = xs.collect::<Result<Vec<_>>>()?;
        mae(&preds, targets)
    };
    let clean = run(&mut inputs.iter().map(|x| predict(x)))?;
    if clean == 0.0 {
        return Err(Error::DegenerateBaseline("unoccluded MAE is zero".into()));
    }
    let mut rel = Matrix::zeros(rows, cols);
    let mut buf = vec![0.0; cells];
    for r in 0..rows {
        for c in 0..cols {
            let (r0, c0) = (r * stride, c * stride);
            let occluded = run(&mut inputs.iter().map(|x| {
                buf.copy_from_slice(x);
                for i in r0..r0 + mask.0 {
                    let row = i * grid.1;
                    buf[row + c0..row + c0 + mask.1].copy_from_slice(&fill[row + c0..row + c0 + mask.1]);
                }
                predict(&buf)
            }))?;
            let v = (occluded - clean) / clean;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("relative loss at position ({r}, {c})")));
            }
            rel.set(r, c, v);
        }
    }
    Ok(OcclusionGrid {
        mask_shape: mask,
        stride,
        clean_mae: clean,
        relative_loss: rel,
    })
}

/// One matrix row per line, comma separated, no header.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        for r in 0..m.rows() {
            let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::head_forward;
    use crate::label::make_label_space;
    use crate::linalg::Dense;
    use crate::pool::global_avg_pool;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> FeatureMap {
        let v = (0..c * h * w).map(|_| rng.random_range(-2.0..2.0)).collect();
        FeatureMap::new(c, h, w, v).unwrap()
    }

    fn random_head(k: usize, d: usize, rng: &mut ChaCha8Rng) -> HeadParams {
        let mut layer = Dense::random(k, d, 1.0, rng);
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        HeadParams::new(layer, make_label_space(0.0, (k - 1) as f64, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_weights_give_constant_bias_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut head = random_head(4, 3, &mut rng);
        head.layer.weight = Matrix::zeros(4, 3);
        let a = class_activation_maps(&random_map(3, 5, 6, &mut rng), &head).unwrap();
        for k in 0..4 {
            assert!(a.channel(k).iter().all(|&v| v == head.layer.bias[k]));
        }
    }

    #[test]
    fn one_hot_row_copies_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut head = random_head(3, 4, &mut rng);
        head.layer.weight = Matrix::zeros(3, 4);
        head.layer.weight.set(1, 2, 1.0);
        head.layer.bias = vec![0.0; 3];
        let f = random_map(4, 3, 3, &mut rng);
        let a = class_activation_maps(&f, &head).unwrap();
        assert_eq!(a.channel(1), f.channel(2));
    }

    #[test]
    fn cam_matches_pixel_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let head = random_head(5, 6, &mut rng);
        let f = random_map(6, 4, 7, &mut rng);
        let a = class_activation_maps(&f, &head).unwrap();
        for k in 0..5 {
            for i in 0..4 {
                for j in 0..7 {
                    let mut s = head.layer.bias[k];
                    for c in 0..6 {
                        s += head.layer.weight.get(k, c) * f.get(c, i, j);
                    }
                    assert!((a.get(k, i, j) - s).abs() < 1e-12);
                }
            }
        }
        let bad = random_map(5, 4, 7, &mut rng);
        assert!(class_activation_maps(&bad, &head).is_err());
    }

    #[test]
    fn score_map_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let one = random_map(1, 3, 4, &mut rng);
        let s = score_map(&one, &[1.0]).unwrap();
        assert_eq!(s.values.as_slice(), one.channel(0));

        let a = random_map(4, 3, 4, &mut rng);
        let s = score_map(&a, &[0.25; 4]).unwrap();
        for p in 0..12 {
            let mean = (0..4).map(|k| a.channel(k)[p]).sum::<f64>() / 4.0;
            assert!((s.values.as_slice()[p] - mean).abs() < 1e-12);
        }
        assert!(score_map(&a, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn score_map_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_map(6, 5, 5, &mut rng);
        let raw: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let s = score_map(&a, &p).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..6 {
                    acc += p[k] * a.get(k, i, j);
                }
                assert!((s.values.get(i, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gap_commutes_with_cam() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let head = random_head(7, 5, &mut rng);
            let f = random_map(5, 6, 4, &mut rng);
            let via_cam = global_avg_pool(&class_activation_maps(&f, &head).unwrap());
            let via_head = head_forward(&global_avg_pool(&f), &head).unwrap();
            for (a, b) in via_cam.iter().zip(&via_head) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_resolution_geometry() {
        assert_eq!(occlusion_positions((224, 224), (32, 32), 32).unwrap(), (7, 7));
        assert_eq!(occlusion_positions((224, 224), (32, 224), 32).unwrap(), (7, 1));
        assert!(occlusion_positions((16, 16), (32, 8), 8).is_err());
        assert!(occlusion_positions((16, 16), (4, 4), 0).is_err());
    }

    fn sum_model(x: &[f64]) -> Result<f64> {
        Ok(x.iter().sum())
    }

    #[test]
    fn full_size_sweep_shape() {
        let n = 224 * 224;
        let inputs = vec![vec![0.01; n], vec![-0.01; n]];
        let targets = [0.0, 1.0];
        let fill = vec![0.0; n];
        let g = occlusion_sensitivity(sum_model, &inputs, &targets, (224, 224), (32, 32), 32, &fill)
            .unwrap();
        assert_eq!((g.relative_loss.rows(), g.relative_loss.cols()), (7, 7));
        let s = occlusion_sensitivity(sum_model, &inputs, &targets, (224, 224), (32, 224), 32, &fill)
            .unwrap();
        assert_eq!((s.relative_loss.rows(), s.relative_loss.cols()), (7, 1));
    }

    #[test]
    fn no_op_fill_gives_zero() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let inputs = vec![x.clone(), x.clone()];
        let g = occlusion_sensitivity(sum_model, &inputs, &[0.0, 1.0], (2, 3), (1, 2), 1, &x).unwrap();
        assert_eq!((g.relative_loss.rows(), g.relative_loss.cols()), (2, 2));
        assert!(g.relative_loss.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn occlusion_is_local() {
        let corner = |x: &[f64]| -> Result<f64> { Ok(10.0 * x[0]) };
        let inputs: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 + 1.0; 16]).collect();
        let targets = [12.0, 22.0, 32.0, 42.0];
        let fill = cell_means(&inputs).unwrap();
        let g = occlusion_sensitivity(corner, &inputs, &targets, (4, 4), (2, 2), 2, &fill).unwrap();
        assert!(g.relative_loss.get(0, 0) != 0.0);
        assert_eq!(g.relative_loss.get(0, 1), 0.0);
        assert_eq!(g.relative_loss.get(1, 0), 0.0);
        assert_eq!(g.relative_loss.get(1, 1), 0.0);
    }

    #[test]
    fn zero_baseline_is_rejected() {
        let inputs = vec![vec![1.0; 4]];
        let r = occlusion_sensitivity(sum_model, &inputs, &[4.0], (2, 2), (1, 1), 1, &[0.0; 4]);
        assert!(matches!(r, Err(Error::DegenerateBaseline(_))));
    }

    #[test]
    fn matrix_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_matrix_csv(&p, &Matrix::from_vec(2, 2, vec![0.0, 0.5, -1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "0.0,0.5\n-1.0,2.0\n");
    }

    proptest! {
        #[test]
        fn score_map_is_linear_in_probs(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let maps = random_map(5, 3, 3, &mut rng);
            let p: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let q: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
            let lhs = score_map(&maps, &mix).unwrap();
            let sp = score_map(&maps, &p).unwrap();
            let sq = score_map(&maps, &q).unwrap();
            for i in 0..9 {
                let rhs = a * sp.values.as_slice()[i] + b * sq.values.as_slice()[i];
                prop_assert!((lhs.values.as_slice()[i] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn identical_fill_is_always_zero(seed in any::<u64>(), stride in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
            let model = |v: &[f64]| -> Result<f64> { Ok(v.iter().zip(&w).map(|(a, b)| (a * b).tanh()).sum()) };
            let inputs = vec![x.clone(); 3];
            let g = occlusion_sensitivity(model, &inputs, &[5.0, 6.0, 7.0], (6, 8), (2, 3), stride, &x).unwrap();
            prop_assert!(g.relative_loss.as_slice().iter().all(|&v| v == 0.0));
        }
    }
}
