//! Spatial pooling over channel-major feature maps: global average, 2×2 max,
//! and their composition (hybrid pooling).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `channels × height × width` tensor, channel-major then row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("feature map dimensions must be positive"));
        }
        if values.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "feature map has {} values, expected {channels}x{height}x{width}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map contains non-finite values"));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, v: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![v; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.values[(c * self.height + i) * self.width + j]
    }

    /// The `h × w` plane of channel `c`.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Validates serde input, which bypasses [`FeatureMap::new`].
    pub fn validated(self) -> Result<Self> {
        Self::new(self.channels, self.height, self.width, self.values)
    }
}

/// Per-channel spatial mean.
pub fn global_avg_pool(map: &FeatureMap) -> Vec<f64> {
    let n = (map.height * map.width) as f64;
    (0..map.channels)
        .map(|c| map.channel(c).iter().sum::<f64>() / n)
        .collect()
}

/// Non-overlapping 2×2 max with stride 2. A trailing odd row or column is dropped.
pub fn max_pool_2x2(map: &FeatureMap) -> Result<FeatureMap> {
    let (h, w) = (map.height / 2, map.width / 2);
    if h == 0 || w == 0 {
        return Err(Error::invalid(format!(
            "2x2 max pooling needs at least a 2x2 map, got {}x{}",
            map.height, map.width
        )));
    }
    let mut values = Vec::with_capacity(map.channels * h * w);
    for c in 0..map.channels {
        for i in 0..h {
            for j in 0..w {
                let m = map
                    .get(c, 2 * i, 2 * j)
                    .max(map.get(c, 2 * i, 2 * j + 1))
                    .max(map.get(c, 2 * i + 1, 2 * j))
                    .max(map.get(c, 2 * i + 1, 2 * j + 1));
                values.push(m);
            }
        }
    }
    FeatureMap::new(map.channels, h, w, values)
}

/// Max pooling followed by global average pooling.
pub fn hybrid_pool(map: &FeatureMap) -> Result<Vec<f64>> {
    Ok(global_avg_pool(&max_pool_2x2(map)?))
}
