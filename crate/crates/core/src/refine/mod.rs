//! Iterative residual refinement and the per-sequence driver.

pub mod driver;
pub mod gru;
pub mod loss;

pub use driver::{run_sequence, run_sequence_with, ConfidenceModel, Encoder, FrameEncoding, Losses, RunOutput};
pub use gru::{gru_step, GruCell};
pub use loss::{disparity_loss, total_loss};

use crate::features::Scale;
use crate::grid::TokenGrid;
use crate::raster::FloatRaster;

/// Bilinear upsampling of a working-scale disparity map to `width × height`.
/// Sample positions use pixel centres, clamped at the borders, and values
/// are multiplied by the scale factor.
pub fn upsample_disparity(disparity: &TokenGrid, scale: Scale, width: usize, height: usize) -> FloatRaster {
    let f = scale.factor() as f64;
    let (sh, sw) = (disparity.height(), disparity.width());
    let coord = |p: usize, n: usize| -> (usize, usize, f64) {
        let s = ((p as f64 + 0.5) / f - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    let data = (0..height)
        .flat_map(|y| {
            let (y0, y1, fy) = coord(y, sh);
            (0..width).map(move |x| {
                let (x0, x1, fx) = coord(x, sw);
                let top = (1.0 - fx) * disparity.get(y0, x0, 0) + fx * disparity.get(y0, x1, 0);
                let bottom = (1.0 - fx) * disparity.get(y1, x0, 0) + fx * disparity.get(y1, x1, 0);
                (f * ((1.0 - fy) * top + fy * bottom)) as f32
            })
        })
        .collect();
    FloatRaster::new(width, height, 1, data).expect("upsampled disparity is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_zero() {
        let up = upsample_disparity(&TokenGrid::filled(4, 4, 1, 2.0), Scale::Quarter, 16, 16);
        assert!(up.data().iter().all(|&v| v == 8.0));
        let up = upsample_disparity(&TokenGrid::zeros(4, 4, 1), Scale::Quarter, 16, 16);
        assert!(up.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_is_preserved() {
        // d(x) = 0.5 x at scale 1/4 becomes 4 · 0.5 · ((X + 0.5) / 4 - 0.5) at full res
        let d = TokenGrid::from_fn(4, 8, 1, |_, x, _| 0.5 * x as f64);
        let up = upsample_disparity(&d, Scale::Quarter, 32, 16);
        for y in 0..16 {
            for x in 2..30 {
                let expect = 2.0 * ((x as f64 + 0.5) / 4.0 - 0.5);
                assert!((up.get(x, y, 0) as f64 - expect).abs() < 1e-5);
            }
        }
    }
}
