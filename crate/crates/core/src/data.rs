//! Synthetic benchmark generation, CSV ingestion, prediction files, and seeded splits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::LabelSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: f64,
    /// Per-sample annotation standard deviation, when known.
    pub sigma: Option<f64>,
}

/// Latent embedding family for [`gen_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curve {
    /// `sin(ω_i t̃ + φ_i)` per feature.
    #[default]
    Sinusoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub noise_std: f64,
    pub curve: Curve,
    pub label_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 2000,
            dim: 16,
            noise_std: 0.05,
            curve: Curve::Sinusoid,
            label_sigma: Some(2.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("synthetic dataset needs n >= 1"));
        }
        if self.dim < 2 {
            return Err(Error::invalid("synthetic dataset needs dim >= 2"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if let Some(s) = self.label_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("label_sigma must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic(SynthConfig),
    Csv(PathBuf),
    /// A subset of another dataset, e.g. one side of a split.
    Split {
        parent: Box<Provenance>,
        side: String,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub space: LabelSpace,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    /// Per-sample σ, or `None` if any sample lacks one.
    pub fn sigmas(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.sigma).collect()
    }
}

/// Range of the per-feature angular frequencies, in radians over the unit latent interval.
pub const OMEGA_RANGE: (f64, f64) = (0.5 * std::f64::consts::PI, 3.0 * std::f64::consts::PI);

/// Draws `t ~ U[l_min, l_max]` and embeds `t̃ = (t - l_min) / range` as
/// `x_i = sin(ω_i t̃ + φ_i) + ε_i`, `ε_i ~ N(0, noise_std²)`. Frequencies and
/// phases are drawn first from the same seeded stream.
pub fn gen_synthetic(config: &SynthConfig, space: &LabelSpace) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let omega: Vec<f64> = (0..config.dim)
        .map(|_| rng.random_range(OMEGA_RANGE.0..OMEGA_RANGE.1))
        .collect();
    let phase: Vec<f64> = (0..config.dim)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let (lo, hi) = (space.l_min(), space.l_max());
    let samples = (0..config.n)
        .map(|_| {
            let t: f64 = rng.random_range(lo..=hi);
            let u = (t - lo) / (hi - lo);
            let features = omega
                .iter()
                .zip(&phase)
                .map(|(w, p)| {
                    let clean = (w * u + p).sin();
                    if config.noise_std > 0.0 {
                        clean + noise.sample(&mut rng)
                    } else {
                        clean
                    }
                })
                .collect();
            Sample {
                features,
                target: t,
                sigma: config.label_sigma,
            }
        })
        .collect();
    Ok(Dataset {
        samples,
        space: space.clone(),
        provenance: Provenance::Synthetic(config.clone()),
    })
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_field(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("column {name}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column {name}: non-finite value {raw:?}")));
    }
    Ok(v)
}

/// Reads `f0,...,f{d-1},y[,sigma]`. Targets must lie on `[l_min, l_max]`; σ must be ≥ 0
/// (zero is kept and handled at evaluation time).
pub fn load_csv(path: &Path, space: &LabelSpace) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let has_sigma = names.last() == Some(&"sigma");
    let y_col = if has_sigma { names.len().wrapping_sub(2) } else { names.len().wrapping_sub(1) };
    if names.len() < 2 || y_col >= names.len() || names[y_col] != "y" {
        return Err(parse_err(path, 1, "header must be f0,...,f{d-1},y[,sigma]"));
    }
    for (i, n) in names[..y_col].iter().enumerate() {
        if *n != format!("f{i}") {
            return Err(parse_err(path, 1, format!("expected column f{i}, found {n:?}")));
        }
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let features = (0..y_col)
            .map(|i| parse_field(path, line, names[i], &record[i]))
            .collect::<Result<Vec<_>>>()?;
        let target = parse_field(path, line, "y", &record[y_col])?;
        if !space.contains(target) {
            return Err(parse_err(
                path,
                line,
                format!("target {target} outside [{}, {}]", space.l_min(), space.l_max()),
            ));
        }
        let sigma = if has_sigma {
            let s = parse_field(path, line, "sigma", &record[y_col + 1])?;
            if s < 0.0 {
                return Err(parse_err(path, line, format!("negative sigma {s}")));
            }
            Some(s)
        } else {
            None
        };
        samples.push(Sample { features, target, sigma });
    }
    if samples.is_empty() {
        return Err(parse_err(path, 1, "no samples"));
    }
    Ok(Dataset {
        samples,
        space: space.clone(),
        provenance: Provenance::Csv(path.to_path_buf()),
    })
}

/// Writes `index,y_true,y_pred` using shortest round-trip float formatting.
pub fn save_predictions(path: &Path, preds: &[f64], truths: &[f64]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::invalid("predictions and truths differ in length"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "index,y_true,y_pred")?;
        for (i, (t, p)) in truths.iter().zip(preds).enumerate() {
            writeln!(w, "{i},{t:?},{p:?}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Reads a predictions file back as `(preds, truths)`.
pub fn load_predictions(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["index", "y_true", "y_pred"] {
        return Err(parse_err(path, 1, "header must be index,y_true,y_pred"));
    }
    let (mut preds, mut truths) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        truths.push(parse_field(path, line, "y_true", &record[1])?);
        preds.push(parse_field(path, line, "y_pred", &record[2])?);
    }
    Ok((preds, truths))
}

/// Seeded shuffle, then the first `round(fraction · n)` samples form the training side.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must be in (0, 1), got {train_fraction}")));
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(format!(
            "fraction {train_fraction} of {n} samples leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let side = |idx: &[usize], name: &str| Dataset {
        samples: idx.iter().map(|&i| dataset.samples[i].clone()).collect(),
        space: dataset.space.clone(),
        provenance: Provenance::Split {
            parent: Box::new(dataset.provenance.clone()),
            side: name.to_string(),
            seed,
        },
    };
    Ok((side(&order[..n_train], "train"), side(&order[n_train..], "test")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::make_label_space;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn grid() -> LabelSpace {
        make_label_space(0.0, 100.0, 1.0).unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn same_seed_same_data() {
        let c = SynthConfig { n: 50, ..SynthConfig::default() };
        assert_eq!(gen_synthetic(&c, &grid()).unwrap(), gen_synthetic(&c, &grid()).unwrap());
        let other = SynthConfig { seed: 1, ..c.clone() };
        assert_ne!(gen_synthetic(&c, &grid()).unwrap(), gen_synthetic(&other, &grid()).unwrap());
    }

    #[test]
    fn noiseless_features_determine_target() {
        let c = SynthConfig { n: 500, noise_std: 0.0, ..SynthConfig::default() };
        let d = gen_synthetic(&c, &grid()).unwrap();
        for a in &d.samples {
            for b in &d.samples {
                if a.features == b.features {
                    assert_eq!(a.target, b.target);
                }
            }
            assert!(a.features.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn config_validation() {
        let g = grid();
        assert!(gen_synthetic(&SynthConfig { n: 0, ..Default::default() }, &g).is_err());
        assert!(gen_synthetic(&SynthConfig { dim: 1, ..Default::default() }, &g).is_err());
        assert!(gen_synthetic(&SynthConfig { noise_std: -1.0, ..Default::default() }, &g).is_err());
    }

    #[test]
    fn targets_pass_uniformity_chi_square() {
        let c = SynthConfig { n: 10_000, dim: 2, seed: 7, ..SynthConfig::default() };
        let d = gen_synthetic(&c, &grid()).unwrap();
        let mut bins = [0usize; 10];
        for s in &d.samples {
            assert!((0.0..=100.0).contains(&s.target));
            bins[((s.target / 10.0) as usize).min(9)] += 1;
        }
        let e = 1000.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // 0.999 quantile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 27.877, "chi2 = {chi2}");
    }

    /// Solves `(XᵀX + αI) w = Xᵀy` by Gaussian elimination with partial pivoting.
    fn ridge(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Vec<f64> {
        let d = x[0].len();
        let mut a = vec![vec![0.0; d + 1]; d];
        for (row, &t) in x.iter().zip(y) {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += row[i] * row[j];
                }
                a[i][d] += row[i] * t;
            }
        }
        for (i, r) in a.iter_mut().enumerate() {
            r[i] += alpha;
        }
        for c in 0..d {
            let p = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            for r in c + 1..d {
                let f = a[r][c] / a[c][c];
                for k in c..=d {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        let mut w = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|k| a[i][k] * w[k]).sum();
            w[i] = (a[i][d] - s) / a[i][i];
        }
        w
    }

    #[test]
    fn ridge_oracle_reaches_reference_error() {
        let d = gen_synthetic(&SynthConfig::default(), &grid()).unwrap();
        let (train, test) = split(&d, 0.8, 0).unwrap();
        let with_bias = |s: &Sample| {
            let mut v = s.features.clone();
            v.push(1.0);
            v
        };
        let x: Vec<Vec<f64>> = train.samples.iter().map(with_bias).collect();
        let w = ridge(&x, &train.targets(), 1e-3);
        let err: f64 = test
            .samples
            .iter()
            .map(|s| {
                let p: f64 = with_bias(s).iter().zip(&w).map(|(a, b)| a * b).sum();
                (p - s.target).abs()
            })
            .sum::<f64>()
            / test.len() as f64;
        assert!(err < 0.08 * 100.0, "ridge MAE {err}");
        // Linear readout is not enough to solve the task outright.
        assert!(err > 0.5, "ridge MAE {err}");
    }

    #[test]
    fn csv_with_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f0,f1,y,sigma\n0.1,0.2,25,2.0\n");
        let d = load_csv(&p, &grid()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.samples[0].features, vec![0.1, 0.2]);
        assert_eq!(d.samples[0].target, 25.0);
        assert_eq!(d.samples[0].sigma, Some(2.0));
        assert_eq!(d.sigmas(), Some(vec![2.0]));
    }

    #[test]
    fn csv_without_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f0,f1,f2,y\n1,2,3,4\n5,6,7,8\n");
        let d = load_csv(&p, &grid()).unwrap();
        assert_eq!(d.targets(), vec![4.0, 8.0]);
        assert!(d.samples.iter().all(|s| s.sigma.is_none()));
        assert_eq!(d.sigmas(), None);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("f0,f1,y\n1,2,3\n1,x,3\n", 3),
            ("f0,f1,y\n1,2,3\n4,5,6\n1,2\n", 4),
            ("f0,f1,y\n1,NaN,3\n", 2),
            ("f0,f1,y\n1,2,inf\n", 2),
            ("f0,g1,y\n1,2,3\n", 1),
            ("f0,f1\n1,2\n", 1),
            ("f0,f1,y\n1,2,300\n", 2),
            ("f0,y,sigma\n1,2,-1\n", 2),
        ];
        for (i, (body, line)) in cases.iter().enumerate() {
            let p = write(&dir, &format!("bad{i}.csv"), body);
            match load_csv(&p, &grid()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, *line as u64, "case {i}: {body:?}"),
                other => panic!("case {i}: expected parse error, got {other:?}"),
            }
        }
        assert!(matches!(load_csv(Path::new("/nonexistent/x.csv"), &grid()), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_keeps_zero_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "z.csv", "f0,y,sigma\n1,2,0\n");
        assert_eq!(load_csv(&p, &grid()).unwrap().samples[0].sigma, Some(0.0));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.csv");
        let preds = vec![1.0 / 3.0, std::f64::consts::E, -1e-300, 12345.678901234567];
        let truths = vec![0.1, 0.2, 0.30000000000000004, 99.0];
        save_predictions(&p, &preds, &truths).unwrap();
        let (p2, t2) = load_predictions(&p).unwrap();
        for (a, b) in preds.iter().zip(&p2).chain(truths.iter().zip(&t2)) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("index,y_true,y_pred\n0,0.1,"));
    }

    #[test]
    fn split_sizes_and_errors() {
        let c = SynthConfig { n: 500, dim: 2, ..SynthConfig::default() };
        let d = gen_synthetic(&c, &grid()).unwrap();
        let (a, b) = split(&d, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (400, 100));
        assert_eq!(split(&d, 0.8, 3).unwrap(), (a, b));
        assert!(split(&d, 0.0, 0).is_err());
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0001, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let c = SynthConfig { n, dim: 2, seed, ..SynthConfig::default() };
            let d = gen_synthetic(&c, &grid()).unwrap();
            let Ok((a, b)) = split(&d, frac, seed) else {
                return Ok(());
            };
            prop_assert_eq!(a.len() + b.len(), n);
            let key = |s: &Sample| s.target.to_bits();
            let sa: HashSet<u64> = a.samples.iter().map(key).collect();
            let sb: HashSet<u64> = b.samples.iter().map(key).collect();
            let all: HashSet<u64> = d.samples.iter().map(key).collect();
            prop_assert!(sa.is_disjoint(&sb));
            prop_assert_eq!(sa.union(&sb).copied().collect::<HashSet<_>>(), all);
        }
    }
}
