//! Deterministic multi-scale features and the per-token projections that
//! produce context, query, key and value embeddings.
//!
//! Each pyramid level carries `C` channels per token: box-downsampled
//! intensity, its horizontal and vertical gradients, and `C - 3` seeded
//! zero-sum projections of the 3×3 intensity neighbourhood.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LinearMap, TokenGrid};
use crate::raster::FloatRaster;
use crate::seed::{rng_for, tags};

pub const MIN_IMAGE_SIZE: usize = 16;
pub const DEFAULT_CHANNELS: usize = 32;
pub const DEFAULT_POOL_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scale {
    Sixteenth,
    Eighth,
    Quarter,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::Sixteenth, Scale::Eighth, Scale::Quarter];

    /// Downsampling factor `1/s`.
    pub fn factor(self) -> usize {
        match self {
            Scale::Sixteenth => 16,
            Scale::Eighth => 8,
            Scale::Quarter => 4,
        }
    }

    pub fn value(self) -> f64 {
        1.0 / self.factor() as f64
    }

    pub fn from_value(s: f64) -> Option<Scale> {
        Scale::ALL.into_iter().find(|sc| (sc.value() - s).abs() < 1e-9)
    }

    /// `round(s · n)`, at least one.
    pub fn extent(self, n: usize) -> usize {
        let f = self.factor();
        ((n + f / 2) / f).max(1)
    }

    fn index(self) -> usize {
        match self {
            Scale::Sixteenth => 0,
            Scale::Eighth => 1,
            Scale::Quarter => 2,
        }
    }
}

/// One grid per scale in [`Scale::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: [TokenGrid; 3],
}

impl Pyramid {
    pub fn get(&self, scale: Scale) -> &TokenGrid {
        &self.levels[scale.index()]
    }

    pub fn into_level(self, scale: Scale) -> TokenGrid {
        let [a, b, c] = self.levels;
        match scale {
            Scale::Sixteenth => a,
            Scale::Eighth => b,
            Scale::Quarter => c,
        }
    }

    pub fn map(&self, mut f: impl FnMut(&TokenGrid) -> Result<TokenGrid>) -> Result<Pyramid> {
        Ok(Pyramid {
            levels: [f(&self.levels[0])?, f(&self.levels[1])?, f(&self.levels[2])?],
        })
    }
}

/// Fixed, seeded feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    channels: usize,
    /// `C - 3` zero-sum 3×3 kernels, row-major.
    patch_kernels: Vec<[f64; 9]>,
}

impl FeatureExtractor {
    pub fn new(channels: usize, seed: u64) -> Result<Self> {
        if channels < 4 {
            return Err(Error::Config(format!(
                "feature channels must be at least 4, got {channels}"
            )));
        }
        let mut rng = rng_for(seed, tags::FEATURE_PATCH);
        let patch_kernels = (0..channels - 3)
            .map(|_| {
                let mut k = [0.0; 9];
                k.iter_mut()
                    .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal) / 3.0);
                let mean = k.iter().sum::<f64>() / 9.0;
                k.iter_mut().for_each(|v| *v -= mean);
                k
            })
            .collect();
        Ok(Self {
            channels,
            patch_kernels,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn build_pyramid(&self, image: &FloatRaster) -> Result<Pyramid> {
        if image.width() < MIN_IMAGE_SIZE || image.height() < MIN_IMAGE_SIZE {
            return Err(Error::Shape(format!(
                "image {}x{} is smaller than {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}",
                image.width(),
                image.height()
            )));
        }
        let level = |s: Scale| self.level(image, s);
        Ok(Pyramid {
            levels: [level(Scale::Sixteenth), level(Scale::Eighth), level(Scale::Quarter)],
        })
    }

    fn level(&self, image: &FloatRaster, scale: Scale) -> TokenGrid {
        let intensity = box_downsample(image, scale);
        let (h, w) = (intensity.height(), intensity.width());
        let c = self.channels;
        let mut out = TokenGrid::zeros(h, w, c);
        for y in 0..h {
            for x in 0..w {
                let i = |yy: isize, xx: isize| intensity.get_clamped(yy, xx, 0);
                let (yi, xi) = (y as isize, x as isize);
                let tok = out.token_mut(y * w + x);
                tok[0] = i(yi, xi);
                tok[1] = one_sided_gradient(w, x, |k| intensity.get(y, k, 0));
                tok[2] = one_sided_gradient(h, y, |k| intensity.get(k, x, 0));
                let mut patch = [0.0; 9];
                for dy in 0..3 {
                    for dx in 0..3 {
                        patch[dy * 3 + dx] = i(yi + dy as isize - 1, xi + dx as isize - 1);
                    }
                }
                for (slot, k) in tok[3..].iter_mut().zip(&self.patch_kernels) {
                    *slot = k.iter().zip(&patch).map(|(a, b)| a * b).sum();
                }
            }
        }
        out
    }
}

/// Central difference in the interior, one-sided differences at the borders,
/// so a linear ramp has a constant gradient everywhere.
fn one_sided_gradient(n: usize, k: usize, at: impl Fn(usize) -> f64) -> f64 {
    if n < 2 {
        0.0
    } else if k == 0 {
        at(1) - at(0)
    } else if k == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        (at(k + 1) - at(k - 1)) / 2.0
    }
}

/// Area-average of the image luminance onto the `scale` grid (1 channel).
pub fn box_downsample(image: &FloatRaster, scale: Scale) -> TokenGrid {
    let (w, h) = (image.width(), image.height());
    let (sw, sh) = (scale.extent(w), scale.extent(h));
    TokenGrid::from_fn(sh, sw, 1, |ty, tx, _| {
        let (y0, y1) = (ty * h / sh, ((ty + 1) * h / sh).max(ty * h / sh + 1));
        let (x0, x1) = (tx * w / sw, ((tx + 1) * w / sw).max(tx * w / sw + 1));
        let mut acc = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                acc += image.luminance(x, y) as f64;
            }
        }
        acc / ((y1 - y0) * (x1 - x0)) as f64
    })
}

/// The fixed linear maps standing in for learned encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    pub seed: u64,
    pub context: LinearMap,
    pub query: LinearMap,
    pub key: LinearMap,
    /// Correlation profile (`D` entries) to cost feature (`C` channels).
    pub cost: LinearMap,
    /// Cost feature to value embedding.
    pub value: LinearMap,
}

impl ProjectionWeights {
    pub fn seeded(seed: u64, channels: usize, max_disparity: usize) -> Self {
        Self {
            seed,
            context: LinearMap::seeded(channels, channels, &mut rng_for(seed, tags::CONTEXT)),
            query: LinearMap::seeded(channels, channels, &mut rng_for(seed, tags::QUERY)),
            key: LinearMap::seeded(channels, channels, &mut rng_for(seed, tags::KEY)),
            cost: LinearMap::seeded(channels, max_disparity, &mut rng_for(seed, tags::COST)),
            value: LinearMap::seeded(channels, channels, &mut rng_for(seed, tags::VALUE)),
        }
    }

    pub fn identity(channels: usize, max_disparity: usize) -> Self {
        Self {
            seed: 0,
            context: LinearMap::identity(channels),
            query: LinearMap::identity(channels),
            key: LinearMap::identity(channels),
            cost: LinearMap::zeros(channels, max_disparity),
            value: LinearMap::identity(channels),
        }
    }
}

/// Applies the context map to every pyramid level.
pub fn encode_context(left: &Pyramid, context: &LinearMap) -> Result<Pyramid> {
    left.map(|g| context.apply(g))
}

/// Query and key embeddings of a context grid.
pub fn project_qk(context: &TokenGrid, weights: &ProjectionWeights) -> Result<(TokenGrid, TokenGrid)> {
    Ok((weights.query.apply(context)?, weights.key.apply(context)?))
}

/// Average-pooled, L2-normalized flattening of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDescriptor {
    pub pooled_height: usize,
    pub pooled_width: usize,
    pub vector: Vec<f64>,
    /// Set when the pooled vector was all zero and could not be normalized.
    pub degenerate: bool,
}

impl PooledDescriptor {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Inner product; zero when either side is degenerate.
    pub fn dot(&self, other: &PooledDescriptor) -> f64 {
        if self.degenerate || other.degenerate {
            return 0.0;
        }
        self.vector.iter().zip(&other.vector).map(|(a, b)| a * b).sum()
    }
}

/// `AvgPool(x) / ‖AvgPool(x)‖₂` with `pool_factor × pool_factor` windows.
/// Grids that do not divide evenly are padded by edge replication.
pub fn pooled_phi(grid: &TokenGrid, pool_factor: usize) -> Result<PooledDescriptor> {
    if pool_factor == 0 {
        return Err(Error::Config("pool factor must be positive".into()));
    }
    let (h, w, c) = grid.shape();
    let ph = h.div_ceil(pool_factor);
    let pw = w.div_ceil(pool_factor);
    let mut vector = vec![0.0; ph * pw * c];
    let area = (pool_factor * pool_factor) as f64;
    for py in 0..ph {
        for px in 0..pw {
            let dst = &mut vector[(py * pw + px) * c..][..c];
            for dy in 0..pool_factor {
                for dx in 0..pool_factor {
                    let y = (py * pool_factor + dy).min(h - 1);
                    let x = (px * pool_factor + dx).min(w - 1);
                    dst.iter_mut().zip(grid.at(y, x)).for_each(|(a, b)| *a += b);
                }
            }
            dst.iter_mut().for_each(|v| *v /= area);
        }
    }
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    let degenerate = norm == 0.0;
    if !degenerate {
        vector.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(PooledDescriptor {
        pooled_height: ph,
        pooled_width: pw,
        vector,
        degenerate,
    })
}
