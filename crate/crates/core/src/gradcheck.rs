//! Central finite-difference checks of the analytic model gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::make_label_space;
use crate::model::{HeadKind, Model, ModelSpec};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, 1)`: relative for large entries, absolute below one.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Compares `analytic` with `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn check_gradient<F>(f: F, x: &[f64], analytic: &[f64], h: f64) -> Result<GradCheck>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if analytic.len() != x.len() {
        return Err(Error::invalid("gradient length differs from the point"));
    }
    let mut probe = x.to_vec();
    let mut numeric = Vec::with_capacity(x.len());
    let (mut worst, mut worst_index) = (0.0f64, 0);
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        let n = (up - down) / (2.0 * h);
        let e = rel_err(analytic[i], n);
        if e.is_nan() || e > worst {
            worst = e;
            worst_index = i;
        }
        numeric.push(n);
    }
    Ok(GradCheck {
        analytic: analytic.to_vec(),
        numeric,
        max_rel_err: worst,
        worst_index,
    })
}

/// Deliberate gradient corruptions used to show the check has teeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Negates the regression term of the distribution-head logit gradient.
    FlipErSign,
}

/// Checks the gradient of the sample loss over every model parameter.
pub fn check_model(model: &Model, x: &[f64], y: f64, h: f64, fault: Option<Fault>) -> Result<GradCheck> {
    let er_sign = match fault {
        Some(Fault::FlipErSign) => -1.0,
        None => 1.0,
    };
    let (_, grads) = model.loss_and_grad_with(x, y, er_sign)?;
    let theta = model.params_flat();
    let f = |p: &[f64]| -> Result<f64> {
        let mut m = model.clone();
        m.set_params_flat(p)?;
        m.loss(x, y)
    };
    check_gradient(f, &theta, &grads.flat(), h)
}

/// One randomized configuration of the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub head: HeadKind,
    pub seed: u64,
    pub feature_dim: usize,
    pub labels: usize,
    pub lambda: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

pub const SUITE_FEATURE_DIMS: [usize; 2] = [4, 16];
pub const SUITE_LABEL_COUNTS: [usize; 2] = [11, 101];
pub const SUITE_LAMBDAS: [f64; 4] = [0.0, 0.01, 1.0, 10.0];

/// Input width of the backbone used by the suite.
const SUITE_INPUT_DIM: usize = 6;
const SUITE_HIDDEN: usize = 8;

/// Builds a random model and sample. The target is redrawn until it is more than
/// `1e-3` away from the prediction, keeping the `|ŷ - y|` kink out of the stencil.
pub fn random_case(
    head: HeadKind,
    seed: u64,
    feature_dim: usize,
    labels: usize,
    lambda: f64,
) -> Result<(Model, Vec<f64>, f64)> {
    let grid = make_label_space(0.0, (labels - 1) as f64, 1.0)?;
    let spec = ModelSpec {
        head,
        dims: vec![SUITE_INPUT_DIM, SUITE_HIDDEN, feature_dim],
        grid: grid.clone(),
        lambda,
        sigma: 2.0,
    };
    let mut model = Model::init(&spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    // Nonzero biases so the check also covers them meaningfully.
    let mut theta = model.params_flat();
    theta.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    model.set_params_flat(&theta)?;
    let x: Vec<f64> = (0..SUITE_INPUT_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y_hat = model.predict(&x)?;
    let mut y = rng.random_range(grid.l_min()..=grid.l_max());
    while (y_hat - y).abs() <= 1e-3 {
        y = rng.random_range(grid.l_min()..=grid.l_max());
    }
    Ok((model, x, y))
}

/// Runs `count` configurations per head, cycling through the feature widths,
/// label counts and λ values above.
pub fn run_suite(
    heads: &[HeadKind],
    count: usize,
    base_seed: u64,
    tolerance: f64,
    fault: Option<Fault>,
) -> Result<Vec<GradcheckCase>> {
    let mut out = Vec::with_capacity(heads.len() * count);
    for &head in heads {
        for i in 0..count {
            let feature_dim = SUITE_FEATURE_DIMS[i % 2];
            let labels = SUITE_LABEL_COUNTS[(i / 2) % 2];
            let lambda = SUITE_LAMBDAS[(i / 4) % 4];
            let seed = base_seed.wrapping_add(i as u64);
            let (model, x, y) = random_case(head, seed, feature_dim, labels, lambda)?;
            let check = check_model(&model, &x, y, FD_STEP, fault)?;
            out.push(GradcheckCase {
                head,
                seed,
                feature_dim,
                labels,
                lambda,
                max_rel_err: check.max_rel_err,
                passed: check.max_rel_err < tolerance,
            });
        }
    }
    Ok(out)
}
