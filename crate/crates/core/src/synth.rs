//! Synthetic stereo video with exact ground-truth disparity.
//!
//! A scene is a textured background plane at constant disparity plus a stack
//! of textured fronto-parallel rectangles, each with its own integer
//! disparity and per-frame pixel velocity. Textures are attached to the
//! objects, so a moving rectangle carries its pattern with it. The right view
//! places every left-view pixel `d` columns further left; where layers
//! overlap, the larger disparity (nearer surface) is painted last and wins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::FloatRaster;
use crate::seed::{rng_for, tags};
use crate::video::{StereoFrame, StereoVideoSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    pub x: i64,
    pub y: i64,
    pub width: usize,
    pub height: usize,
    pub disparity: i64,
    /// Pixels per frame, `(dx, dy)`.
    #[serde(default)]
    pub velocity: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub frame: usize,
    pub amplitude: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background_disparity: i64,
    #[serde(default)]
    pub rects: Vec<RectSpec>,
    #[serde(default)]
    pub corruptions: Vec<Corruption>,
    /// Lattice spacing of the value-noise textures, in pixels.
    #[serde(default = "default_texture_cell")]
    pub texture_cell: usize,
}

fn default_texture_cell() -> usize {
    2
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::Scene("canvas size and frame count must be positive".into()));
        }
        if self.texture_cell == 0 {
            return Err(Error::Scene("texture_cell must be positive".into()));
        }
        if self.background_disparity < 0 {
            return Err(Error::Scene("background disparity is negative".into()));
        }
        for (i, r) in self.rects.iter().enumerate() {
            if r.disparity < 0 {
                return Err(Error::Scene(format!("rect {i} has negative disparity {}", r.disparity)));
            }
            if r.width == 0 || r.height == 0 {
                return Err(Error::Scene(format!("rect {i} is empty")));
            }
            for t in 0..self.frames {
                let (x, y) = r.origin_at(t);
                if x < 0 || y < 0 || x as usize + r.width > self.width || y as usize + r.height > self.height {
                    return Err(Error::Scene(format!("rect {i} leaves the canvas at frame {t}")));
                }
            }
        }
        for c in &self.corruptions {
            if c.frame >= self.frames {
                return Err(Error::Scene(format!(
                    "corruption targets frame {} of {}",
                    c.frame, self.frames
                )));
            }
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return Err(Error::Scene(format!("corruption amplitude {} is invalid", c.amplitude)));
            }
        }
        Ok(())
    }

    pub fn corrupted_frames(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.corruptions.iter().map(|c| c.frame).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl RectSpec {
    pub fn origin_at(&self, t: usize) -> (i64, i64) {
        (self.x + self.velocity.0 * t as i64, self.y + self.velocity.1 * t as i64)
    }
}

/// Bilinear value noise in `[0, 1]`.
struct Texture {
    width: usize,
    values: Vec<f32>,
}

impl Texture {
    fn new(width: usize, height: usize, cell: usize, rng: &mut impl Rng) -> Self {
        let lw = width / cell + 2;
        let lh = height / cell + 2;
        let lattice: Vec<f32> = (0..lw * lh).map(|_| rng.random::<f32>()).collect();
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let gy = y / cell;
            let fy = (y % cell) as f32 / cell as f32;
            for x in 0..width {
                let gx = x / cell;
                let fx = (x % cell) as f32 / cell as f32;
                let at = |i: usize, j: usize| lattice[j * lw + i];
                let top = at(gx, gy) * (1.0 - fx) + at(gx + 1, gy) * fx;
                let bottom = at(gx, gy + 1) * (1.0 - fx) + at(gx + 1, gy + 1) * fx;
                values.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        Self { width, values }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

/// Which surface is visible at each left-view pixel; `None` is the background.
pub type LayerMap = Vec<Option<usize>>;

pub struct SceneFrame {
    pub left: FloatRaster,
    pub right: FloatRaster,
    pub gt: FloatRaster,
    pub left_layers: LayerMap,
    pub right_layers: LayerMap,
}

/// Renders every frame of `spec`. Identical `(spec, seed)` produce
/// bit-identical output.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<StereoVideoSequence> {
    let frames = render_frames(spec, seed)?;
    let (pairs, gts) = frames
        .into_iter()
        .map(|f| {
            (
                StereoFrame {
                    left: f.left,
                    right: f.right,
                },
                f.gt,
            )
        })
        .unzip();
    StereoVideoSequence::new(pairs, Some(gts))
}

/// Like [`generate_scene`] but also returns the per-pixel visible layer in
/// both views, which identifies occlusions.
pub fn render_frames(spec: &SceneSpec, seed: u64) -> Result<Vec<SceneFrame>> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let b = spec.background_disparity as usize;
    let background = Texture::new(w + b, h, spec.texture_cell, &mut rng_for(seed, tags::BACKGROUND));
    let textures: Vec<Texture> = spec
        .rects
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Texture::new(
                r.width,
                r.height,
                spec.texture_cell,
                &mut rng_for(seed, tags::LAYER + i as u64),
            )
        })
        .collect();
    // painter's order: far (small disparity) first, stable on declaration order
    let mut order: Vec<usize> = (0..spec.rects.len()).collect();
    order.sort_by_key(|&i| spec.rects[i].disparity);

    let mut out = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut left = vec![0f32; w * h];
        let mut right = vec![0f32; w * h];
        let mut gt = vec![b as f32; w * h];
        let mut left_layers: LayerMap = vec![None; w * h];
        let mut right_layers: LayerMap = vec![None; w * h];
        for y in 0..h {
            for x in 0..w {
                left[y * w + x] = background.at(x, y);
                right[y * w + x] = background.at(x + b, y);
            }
        }
        for &i in &order {
            let r = &spec.rects[i];
            let tex = &textures[i];
            let (ox, oy) = r.origin_at(t);
            for v in 0..r.height {
                let y = oy as usize + v;
                for u in 0..r.width {
                    let x = ox as usize + u;
                    let value = tex.at(u, v);
                    left[y * w + x] = value;
                    gt[y * w + x] = r.disparity as f32;
                    left_layers[y * w + x] = Some(i);
                    let xr = x as i64 - r.disparity;
                    if xr >= 0 {
                        right[y * w + xr as usize] = value;
                        right_layers[y * w + xr as usize] = Some(i);
                    }
                }
            }
        }
        for c in spec.corruptions.iter().filter(|c| c.frame == t) {
            let mut rng = rng_for(seed, tags::CORRUPTION + t as u64);
            let a = c.amplitude;
            if a > 0.0 {
                for v in right.iter_mut() {
                    *v += rng.random_range(-a..=a);
                }
            }
        }
        out.push(SceneFrame {
            left: FloatRaster::new(w, h, 1, left)?,
            right: FloatRaster::new(w, h, 1, right)?,
            gt: FloatRaster::new(w, h, 1, gt)?,
            left_layers,
            right_layers,
        });
    }
    Ok(out)
}

/// Parameters for a randomly laid-out scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSceneParams {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub rects: usize,
    pub corrupted_frames: usize,
    pub corruption_amplitude: f32,
    pub max_disparity: i64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 20,
            rects: 3,
            corrupted_frames: 3,
            corruption_amplitude: 0.5,
            max_disparity: 24,
        }
    }
}

/// Draws a scene layout (rectangles, velocities, corrupted frames) from `seed`.
pub fn random_scene_spec(params: &RandomSceneParams, seed: u64) -> Result<SceneSpec> {
    let p = params;
    if p.width < 16 || p.height < 16 || p.frames == 0 || p.max_disparity < 2 {
        return Err(Error::Scene(
            "random scenes need at least 16x16 pixels, one frame and max_disparity >= 2".into(),
        ));
    }
    if p.corrupted_frames > p.frames {
        return Err(Error::Scene("more corrupted frames than frames".into()));
    }
    let mut rng = rng_for(seed, tags::SUITE);
    let background_disparity = rng.random_range(1..=(p.max_disparity / 4).max(1));
    let mut rects = Vec::with_capacity(p.rects);
    let travel = p.frames as i64 - 1;
    for _ in 0..p.rects {
        let width = rng.random_range(p.width / 6..=p.width / 3);
        let height = rng.random_range(p.height / 6..=p.height / 3);
        let mut velocity = (rng.random_range(-1..=1i64), rng.random_range(-1..=1i64));
        // keep the whole trajectory on the canvas
        let span = |extent: usize, size: usize, v: i64| -> Option<(i64, i64)> {
            let lo = if v < 0 { -v * travel } else { 0 };
            let hi = extent as i64 - size as i64 - if v > 0 { v * travel } else { 0 };
            (lo <= hi).then_some((lo, hi))
        };
        let sx = span(p.width, width, velocity.0).unwrap_or_else(|| {
            velocity.0 = 0;
            (0, (p.width - width) as i64)
        });
        let sy = span(p.height, height, velocity.1).unwrap_or_else(|| {
            velocity.1 = 0;
            (0, (p.height - height) as i64)
        });
        rects.push(RectSpec {
            x: rng.random_range(sx.0..=sx.1),
            y: rng.random_range(sy.0..=sy.1),
            width,
            height,
            disparity: rng.random_range(background_disparity + 1..=p.max_disparity),
            velocity,
        });
    }
    let mut frames: Vec<usize> = (0..p.frames).collect();
    // partial Fisher-Yates for a uniform subset
    for i in 0..p.corrupted_frames {
        let j = rng.random_range(i..p.frames);
        frames.swap(i, j);
    }
    let mut corrupted: Vec<usize> = frames[..p.corrupted_frames].to_vec();
    corrupted.sort_unstable();
    let spec = SceneSpec {
        width: p.width,
        height: p.height,
        frames: p.frames,
        background_disparity,
        rects,
        corruptions: corrupted
            .into_iter()
            .map(|frame| Corruption {
                frame,
                amplitude: p.corruption_amplitude,
            })
            .collect(),
        texture_cell: default_texture_cell(),
    };
    spec.validate()?;
    Ok(spec)
}
