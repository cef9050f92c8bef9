//! Label grids and the encodings of a scalar target over them: Gaussian label
//! distribution, cumulative distribution, and the ordinal ranking vector.
//!
//! Grid indices are zero-based throughout. A ranking vector has `K - 1` entries;
//! entry `i` answers "is the target above `labels[i]`?".

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SPAN_TOLERANCE: f64 = 1e-9;

/// Evenly spaced, ordered label grid `[l_min : step : l_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct LabelSpace {
    l_min: f64,
    l_max: f64,
    step: f64,
    labels: Arc<[f64]>,
}

/// Serialized form of a [`LabelSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl TryFrom<GridSpec> for LabelSpace {
    type Error = Error;

    fn try_from(g: GridSpec) -> Result<Self> {
        make_label_space(g.min, g.max, g.step)
    }
}

impl From<LabelSpace> for GridSpec {
    fn from(s: LabelSpace) -> Self {
        s.spec()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// Parses MATLAB-style `min:step:max`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("grid `{s}` is not of the form min:step:max")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("grid `{s}`: `{p}` is not a number")))
        };
        Ok(GridSpec {
            min: num(parts[0])?,
            step: num(parts[1])?,
            max: num(parts[2])?,
        })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.step, self.max)
    }
}

/// Builds the grid `l_min + i * step` for `i = 0..K`, with the last point pinned to `l_max`.
pub fn make_label_space(l_min: f64, l_max: f64, step: f64) -> Result<LabelSpace> {
    if !(l_min.is_finite() && l_max.is_finite() && step.is_finite()) {
        return Err(Error::invalid("grid bounds and step must be finite"));
    }
    if step <= 0.0 {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }
    if l_max <= l_min {
        return Err(Error::invalid(format!(
            "grid needs l_max > l_min, got [{l_min}, {l_max}]"
        )));
    }
    let span = (l_max - l_min) / step;
    let intervals = span.round();
    if (span - intervals).abs() > SPAN_TOLERANCE {
        return Err(Error::DegenerateGrid(format!(
            "({l_max} - {l_min}) / {step} = {span} is not an integer"
        )));
    }
    let k = intervals as usize + 1;
    let mut labels: Vec<f64> = (0..k).map(|i| l_min + i as f64 * step).collect();
    labels[k - 1] = l_max;
    Ok(LabelSpace {
        l_min,
        l_max,
        step,
        labels: labels.into(),
    })
}

impl LabelSpace {
    pub fn l_min(&self) -> f64 {
        self.l_min
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of grid points `K`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn range(&self) -> f64 {
        self.l_max - self.l_min
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.l_min && y <= self.l_max
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            min: self.l_min,
            max: self.l_max,
            step: self.step,
        }
    }

    /// Index of the grid point nearest `y`, ties toward the lower index, clamped to the grid.
    pub fn nearest_index(&self, y: f64) -> usize {
        let t = (y - self.l_min) / self.step;
        if t <= 0.0 {
            return 0;
        }
        let lo = t.floor();
        let idx = if t - lo > 0.5 { lo + 1.0 } else { lo };
        (idx as usize).min(self.len() - 1)
    }
}

/// Probability vector over a [`LabelSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: LabelSpace,
    probs: Vec<f64>,
}

impl Distribution {
    /// Wraps `probs`, checking length, sign and normalization (1e-9).
    pub fn new(space: LabelSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::invalid(format!(
                "distribution has {} entries, grid has {}",
                probs.len(),
                space.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("distribution entries must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(Distribution { space, probs })
    }

    pub(crate) fn new_unchecked(space: LabelSpace, probs: Vec<f64>) -> Self {
        Distribution { space, probs }
    }

    pub fn uniform(space: LabelSpace) -> Self {
        let k = space.len();
        Distribution {
            probs: vec![1.0 / k as f64; k],
            space,
        }
    }

    pub fn delta(space: LabelSpace, index: usize) -> Result<Self> {
        if index >= space.len() {
            return Err(Error::invalid(format!("index {index} outside grid of {}", space.len())));
        }
        let mut probs = vec![0.0; space.len()];
        probs[index] = 1.0;
        Ok(Distribution { space, probs })
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// First index of the largest probability.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Cumulative distribution sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfVector {
    pub space: LabelSpace,
    pub values: Vec<f64>,
}

/// Ordinal encoding with `K - 1` thresholds; exact (0/1) or approximate (in `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct RankingVector {
    pub space: LabelSpace,
    pub values: Vec<f64>,
}

impl RankingVector {
    /// Number of leading entries above one half.
    pub fn count_above_half(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.5).count()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")))
    }
}

/// Discretized normal density centred at `y`, renormalized to sum to one.
///
/// Targets outside the grid are accepted; their mass piles up at the nearest edge.
/// Use [`LabelSpace::contains`] to flag them.
pub fn encode_distribution(y: f64, sigma: f64, space: &LabelSpace) -> Result<Distribution> {
    check_sigma(sigma)?;
    if !y.is_finite() {
        return Err(Error::invalid("target must be finite"));
    }
    let two_var = 2.0 * sigma * sigma;
    // Shift the exponent by the smallest squared distance so the peak is exp(0) = 1
    // and the normalizer never underflows, even for far out-of-range targets.
    let min_sq = space
        .labels()
        .iter()
        .map(|&l| (l - y) * (l - y))
        .fold(f64::INFINITY, f64::min);
    let mut probs: Vec<f64> = space
        .labels()
        .iter()
        .map(|&l| (-((l - y) * (l - y) - min_sq) / two_var).exp())
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(Distribution::new_unchecked(space.clone(), probs))
}

/// Normal c.d.f. at every grid point: `½ (1 + erf((l_k - y) / (σ√2)))`.
pub fn encode_cdf(y: f64, sigma: f64, space: &LabelSpace) -> Result<CdfVector> {
    check_sigma(sigma)?;
    let scale = sigma * std::f64::consts::SQRT_2;
    let values = space
        .labels()
        .iter()
        .map(|&l| 0.5 * (1.0 + libm::erf((l - y) / scale)))
        .collect();
    Ok(CdfVector {
        space: space.clone(),
        values,
    })
}

/// Exact ranking encoding: entry `i` is 1 when `labels[i] < y`, i.e. for
/// `y ∈ (l_{k-1}, l_k]` the first `k - 1` entries are one. `y = l_min` gives all zeros.
pub fn encode_ranking(y: f64, space: &LabelSpace) -> Result<RankingVector> {
    if !space.contains(y) {
        return Err(Error::invalid(format!(
            "target {y} outside grid [{}, {}]",
            space.l_min(),
            space.l_max()
        )));
    }
    // Grid points within this distance of y count as equal to it.
    let tie = 1e-9 * space.step();
    let k = space.len();
    let values = space.labels()[..k - 1]
        .iter()
        .map(|&l| if l < y - tie { 1.0 } else { 0.0 })
        .collect();
    Ok(RankingVector {
        space: space.clone(),
        values,
    })
}

/// Running prefix sum `T p`, the discrete c.d.f. of `dist`.
pub fn cumulate(dist: &Distribution) -> CdfVector {
    let mut acc = 0.0;
    let values = dist
        .probs()
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    CdfVector {
        space: dist.space().clone(),
        values,
    }
}

/// Approximate ranking vector `1 - T p` over the first `K - 1` grid points.
pub fn ranking_from_distribution(dist: &Distribution) -> RankingVector {
    let cdf = cumulate(dist);
    let k = cdf.values.len();
    let values = cdf.values[..k - 1]
        .iter()
        .map(|c| (1.0 - c).clamp(0.0, 1.0))
        .collect();
    RankingVector {
        space: dist.space().clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn age_grid() -> LabelSpace {
        make_label_space(0.0, 100.0, 1.0).unwrap()
    }

    /// Normal density evaluated pointwise, then sum-normalized.
    fn gaussian_oracle(y: f64, sigma: f64, labels: &[f64]) -> Vec<f64> {
        let c = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
        let raw: Vec<f64> = labels
            .iter()
            .map(|l| c * (-(l - y).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(make_label_space(0.0, 100.0, 1.0).unwrap().len(), 101);
        assert_eq!(make_label_space(1.0, 5.0, 0.1).unwrap().len(), 41);
        assert_eq!(make_label_space(1.0, 7.0, 0.1).unwrap().len(), 61);
        let two = make_label_space(0.0, 1.0, 1.0).unwrap();
        assert_eq!(two.labels(), &[0.0, 1.0]);
    }

    #[test]
    fn fractional_step_does_not_drift() {
        let s = make_label_space(1.0, 5.0, 0.1).unwrap();
        for (i, w) in s.labels().windows(2).enumerate() {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12, "gap {i}");
        }
        assert_eq!(s.labels()[40], 5.0);
        assert_eq!(s.labels()[0], 1.0);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(make_label_space(0.0, 1.0, 0.3), Err(Error::DegenerateGrid(_))));
        assert!(matches!(make_label_space(0.0, 1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_label_space(0.0, 1.0, -1.0), Err(Error::InvalidArgument(_))));
        assert!(make_label_space(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn grid_spec_parses_matlab_notation() {
        let g: GridSpec = "0:1:100".parse().unwrap();
        assert_eq!((g.min, g.step, g.max), (0.0, 1.0, 100.0));
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("a:1:2".parse::<GridSpec>().is_err());
    }

    #[test]
    fn nearest_index_ties_go_low() {
        let s = age_grid();
        assert_eq!(s.nearest_index(49.6), 50);
        assert_eq!(s.nearest_index(49.5), 49);
        assert_eq!(s.nearest_index(-3.0), 0);
        assert_eq!(s.nearest_index(130.0), 100);
    }

    #[test]
    fn distribution_symmetric_about_target() {
        let d = encode_distribution(50.0, 2.0, &age_grid()).unwrap();
        assert!((d.probs()[49] - d.probs()[51]).abs() < 1e-12);
        assert_eq!(d.argmax(), 50);
    }

    #[test]
    fn distribution_matches_density_oracle() {
        let s = age_grid();
        let d = encode_distribution(50.0, 2.0, &s).unwrap();
        let oracle = gaussian_oracle(50.0, 2.0, s.labels());
        for (a, b) in d.probs().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((d.probs()[50] - 0.1995).abs() < 1e-4);
    }

    #[test]
    fn argmax_tie_goes_to_lower_index() {
        let d = encode_distribution(50.5, 1.0, &age_grid()).unwrap();
        assert_eq!(d.probs()[50], d.probs()[51]);
        assert_eq!(d.argmax(), 50);
    }

    #[test]
    fn out_of_range_target_piles_on_edge() {
        let s = age_grid();
        assert!(!s.contains(500.0));
        let d = encode_distribution(500.0, 2.0, &s).unwrap();
        assert_eq!(d.argmax(), 100);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(encode_distribution(50.0, 0.0, &s).is_err());
    }

    #[test]
    fn cdf_points() {
        let s = age_grid();
        let c = encode_cdf(50.0, 2.0, &s).unwrap();
        assert!((c.values[50] - 0.5).abs() < 1e-15);
        // Φ(1)
        assert!((c.values[52] - 0.841_344_746_068_542_9).abs() < 1e-7);
        let sharp = encode_cdf(50.0, 0.01, &s).unwrap();
        assert!(sharp.values[51] >= 1.0 - 1e-10);
        assert!(encode_cdf(50.0, -1.0, &s).is_err());
    }

    #[test]
    fn ranking_examples() {
        let s = age_grid();
        let r = encode_ranking(50.0, &s).unwrap();
        assert_eq!(r.values.len(), 100);
        assert!(r.values[..50].iter().all(|&v| v == 1.0));
        assert!(r.values[50..].iter().all(|&v| v == 0.0));
        assert!(encode_ranking(0.0, &s).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(encode_ranking(100.0, &s).unwrap().values.iter().all(|&v| v == 1.0));
        assert!(encode_ranking(100.5, &s).is_err());
        assert!(encode_ranking(-0.5, &s).is_err());
    }

    #[test]
    fn ranking_on_fractional_grid_treats_rounded_labels_as_equal() {
        let s = make_label_space(1.0, 5.0, 0.1).unwrap();
        // labels[3] is 1.3000000000000003 in floating point.
        let r = encode_ranking(1.3, &s).unwrap();
        assert_eq!(r.count_above_half(), 3);
    }

    #[test]
    fn cumulate_examples() {
        let s = make_label_space(0.0, 9.0, 1.0).unwrap();
        let c = cumulate(&Distribution::delta(s.clone(), 4).unwrap());
        for (k, v) in c.values.iter().enumerate() {
            assert_eq!(*v, if k < 4 { 0.0 } else { 1.0 });
        }
        let u = cumulate(&Distribution::uniform(s));
        for (k, v) in u.values.iter().enumerate() {
            assert!((v - (k + 1) as f64 / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn prefix_sum_tracks_erf_cdf_within_half_cell() {
        let s = age_grid();
        let p = encode_distribution(50.0, 2.0, &s).unwrap();
        let max_density = p.probs().iter().cloned().fold(0.0, f64::max) / s.step();
        let bound = 0.5 * s.step() * max_density;
        let prefix = cumulate(&p);
        let erf = encode_cdf(50.0, 2.0, &s).unwrap();
        for (a, b) in prefix.values.iter().zip(&erf.values) {
            assert!((a - b).abs() <= bound + 1e-12, "{a} vs {b}, bound {bound}");
        }
    }

    #[test]
    fn approximate_ranking_examples() {
        let s = age_grid();
        let r = ranking_from_distribution(&Distribution::delta(s.clone(), 0).unwrap());
        assert!(r.values.iter().all(|&v| v == 0.0));
        let two = make_label_space(0.0, 1.0, 1.0).unwrap();
        let r = ranking_from_distribution(&Distribution::uniform(two));
        assert_eq!(r.values, vec![0.5]);
    }

    #[test]
    fn approximate_ranking_matches_exact_for_on_grid_targets() {
        let s = age_grid();
        let exact = encode_ranking(50.0, &s).unwrap();
        let approx = ranking_from_distribution(&encode_distribution(50.0, 0.1, &s).unwrap());
        let dev = exact
            .values
            .iter()
            .zip(&approx.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-5, "deviation {dev}");
    }

    #[test]
    fn half_grid_target_splits_mass_between_neighbours() {
        // y = 50.5 sits equidistant from labels 50 and 51, so the discrete prefix sum
        // at label 50 is one half whatever sigma is. The continuous c.d.f. does not
        // have this problem.
        let s = age_grid();
        let exact = encode_ranking(50.5, &s).unwrap();
        let p = encode_distribution(50.5, 0.1, &s).unwrap();
        let approx = ranking_from_distribution(&p);
        assert!((approx.values[50] - 0.5).abs() < 1e-12);
        assert_eq!(exact.values[50], 1.0);

        let erf = encode_cdf(50.5, 0.1, &s).unwrap();
        let dev = exact
            .values
            .iter()
            .zip(&erf.values)
            .map(|(r, c)| (r - (1.0 - c)).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-5, "deviation {dev}");
    }

    proptest! {
        #[test]
        fn distribution_is_normalized(y in -20.0f64..120.0, sigma in 0.05f64..30.0) {
            let d = encode_distribution(y, sigma, &age_grid()).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn argmax_is_nearest_grid_point(y in 0.0f64..100.0, sigma in 0.1f64..10.0) {
            let s = age_grid();
            let d = encode_distribution(y, sigma, &s).unwrap();
            prop_assert_eq!(d.argmax(), s.nearest_index(y));
        }

        #[test]
        fn cumulate_is_running_sum(raw in proptest::collection::vec(0.0f64..1.0, 2..60)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let k = raw.len();
            let s = make_label_space(0.0, (k - 1) as f64, 1.0).unwrap();
            let p = Distribution::new(s, raw.iter().map(|v| v / total).collect()).unwrap();
            let c = cumulate(&p);
            for j in 0..k {
                let direct: f64 = p.probs()[..=j].iter().sum();
                prop_assert!((c.values[j] - direct).abs() < 1e-14);
            }
            prop_assert!((c.values[k - 1] - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cdf_is_nondecreasing(y in -50.0f64..150.0, sigma in 1e-3f64..50.0) {
            let c = encode_cdf(y, sigma, &age_grid()).unwrap();
            prop_assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn ranking_is_a_prefix_of_ones(y in 0.0f64..=100.0) {
            let s = age_grid();
            let r = encode_ranking(y, &s).unwrap();
            let ones = r.values.iter().filter(|&&v| v == 1.0).count();
            prop_assert!(r.values[..ones].iter().all(|&v| v == 1.0));
            prop_assert!(r.values[ones..].iter().all(|&v| v == 0.0));
            // y in (l_{k-1}, l_k] has k - 1 ones, which is the count of labels below y.
            let below = s.labels().iter().filter(|&&l| l < y).count();
            prop_assert_eq!(ones, below);
        }
    }
}
