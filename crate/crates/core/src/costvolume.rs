//! Correlation volumes, cost encoding and RAFT-style volume lookup.

use crate::error::{Error, Result};
use crate::grid::{dot, LinearMap, TokenGrid};

pub const DEFAULT_LOOKUP_RADIUS: usize = 4;

/// `corr(y, x, d) = ⟨f_L(y, x), f_R(y, x − d)⟩ / √C` for `d ∈ [0, D)`;
/// entries whose right-view column falls off the grid are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVolume {
    height: usize,
    width: usize,
    max_disparity: usize,
    data: Vec<f64>,
}

impl CorrelationVolume {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn max_disparity(&self) -> usize {
        self.max_disparity
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `D`-entry correlation profile of one token.
    #[inline]
    pub fn profile(&self, y: usize, x: usize) -> &[f64] {
        let d = self.max_disparity;
        &self.data[(y * self.width + x) * d..][..d]
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, d: usize) -> f64 {
        self.profile(y, x)[d]
    }

    /// The volume viewed as a grid of `D`-channel tokens.
    pub fn as_grid(&self) -> TokenGrid {
        TokenGrid::new(self.height, self.width, self.max_disparity, self.data.clone()).expect("volume is finite")
    }

    pub fn zeros(height: usize, width: usize, max_disparity: usize) -> Self {
        Self {
            height,
            width,
            max_disparity,
            data: vec![0.0; height * width * max_disparity],
        }
    }
}

pub fn build_correlation(left: &TokenGrid, right: &TokenGrid, max_disparity: usize) -> Result<CorrelationVolume> {
    if left.shape() != right.shape() {
        return Err(Error::Shape(format!(
            "left {:?} and right {:?} feature grids differ",
            left.shape(),
            right.shape()
        )));
    }
    let (h, w, c) = left.shape();
    if max_disparity == 0 || max_disparity > w {
        return Err(Error::Shape(format!(
            "max disparity {max_disparity} must be in 1..={w}"
        )));
    }
    let norm = (c as f64).sqrt();
    let mut data = vec![0.0; h * w * max_disparity];
    for y in 0..h {
        for x in 0..w {
            let fl = left.at(y, x);
            let dst = &mut data[(y * w + x) * max_disparity..][..max_disparity];
            for (d, slot) in dst.iter_mut().enumerate().take(x + 1) {
                let fr = right.at(y, x - d);
                *slot = dot(fl, fr) / norm;
            }
        }
    }
    Ok(CorrelationVolume {
        height: h,
        width: w,
        max_disparity,
        data,
    })
}

/// Samples each token's correlation profile at `disp ± radius` with linear
/// interpolation in `d`. Output has `2·radius + 1` channels; samples outside
/// `[0, D)` contribute zero.
pub fn lookup(volume: &CorrelationVolume, disparity: &TokenGrid, radius: usize) -> Result<TokenGrid> {
    if disparity.height() != volume.height || disparity.width() != volume.width || disparity.channels() != 1 {
        return Err(Error::Shape(format!(
            "disparity {:?} does not match volume {}x{}",
            disparity.shape(),
            volume.height,
            volume.width
        )));
    }
    let taps = 2 * radius + 1;
    let dmax = volume.max_disparity as isize;
    let mut out = TokenGrid::zeros(volume.height, volume.width, taps);
    for y in 0..volume.height {
        for x in 0..volume.width {
            let profile = volume.profile(y, x);
            let sample = |d: isize| {
                if (0..dmax).contains(&d) {
                    profile[d as usize]
                } else {
                    0.0
                }
            };
            let center = disparity.get(y, x, 0);
            let dst = out.token_mut(y * volume.width + x);
            for (j, slot) in dst.iter_mut().enumerate() {
                let pos = center + j as f64 - radius as f64;
                let lo = pos.floor();
                let frac = pos - lo;
                let lo = lo as isize;
                *slot = if frac == 0.0 {
                    sample(lo)
                } else {
                    (1.0 - frac) * sample(lo) + frac * sample(lo + 1)
                };
            }
        }
    }
    Ok(out)
}

/// Encoded matching cost and the value embedding derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFeature {
    pub cost: TokenGrid,
    pub value: TokenGrid,
}

/// `F_cost = W_cost · corr`, `v = W_value · F_cost`, per token.
pub fn encode_cost(volume: &CorrelationVolume, cost_map: &LinearMap, value_map: &LinearMap) -> Result<CostFeature> {
    if cost_map.inputs() != volume.max_disparity {
        return Err(Error::Shape(format!(
            "cost encoder expects {} disparities, volume has {}",
            cost_map.inputs(),
            volume.max_disparity
        )));
    }
    let cost = cost_map.apply(&volume.as_grid())?;
    let value = value_map.apply(&cost)?;
    Ok(CostFeature { cost, value })
}

/// Winner-take-all disparity with parabolic sub-pixel refinement, one channel.
pub fn winner_take_all(volume: &CorrelationVolume) -> TokenGrid {
    let d = volume.max_disparity;
    TokenGrid::from_fn(volume.height, volume.width, 1, |y, x, _| {
        // only disparities whose right-view column exists
        let valid = d.min(x + 1);
        let p = &volume.profile(y, x)[..valid];
        let best = p.iter().enumerate().fold(0, |b, (i, v)| if *v > p[b] { i } else { b });
        if best == 0 || best + 1 >= valid {
            return best as f64;
        }
        let (l, c, r) = (p[best - 1], p[best], p[best + 1]);
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            best as f64 + (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            best as f64
        }
    })
}
