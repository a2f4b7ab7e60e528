//! Sequence losses with exponentially increasing iteration weights.

use crate::confidence::iteration_weights;
use crate::error::{Error, Result};
use crate::raster::FloatRaster;

/// Mean absolute difference between two single-channel rasters.
fn mean_abs(a: &FloatRaster, b: &FloatRaster) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "{}x{} prediction vs {}x{} ground truth",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let n = a.data().len().max(1) as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .sum::<f64>()
        / n)
}

/// `Σ_t Σ_n γ^{N-n} · mean|d_t^n - d̂_t|` with `predictions[t][n]`.
pub fn disparity_loss(predictions: &[Vec<FloatRaster>], gt: Option<&[FloatRaster]>, gamma: f64) -> Result<f64> {
    let gt = gt.ok_or_else(|| Error::Missing("disparity loss needs ground truth".into()))?;
    if gt.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "{} predicted frames, {} ground-truth frames",
            predictions.len(),
            gt.len()
        )));
    }
    let mut total = 0.0;
    for (iters, truth) in predictions.iter().zip(gt) {
        for (w, d) in iteration_weights(iters.len(), gamma).into_iter().zip(iters) {
            total += w * mean_abs(d, truth)?;
        }
    }
    Ok(total)
}

/// `L_total = L_d + L_conf`.
pub fn total_loss(disparity: f64, confidence: f64) -> f64 {
    disparity + confidence
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        let gt = vec![FloatRaster::filled(4, 4, 1, 3.0)];
        let perfect = vec![vec![gt[0].clone(); 10]];
        assert_eq!(disparity_loss(&perfect, Some(&gt), 0.9).unwrap(), 0.0);
        let off = vec![vec![FloatRaster::filled(4, 4, 1, 4.0); 10]];
        assert!((disparity_loss(&off, Some(&gt), 0.9).unwrap() - 6.513216).abs() < 1e-6);
        assert!(matches!(disparity_loss(&off, None, 0.9), Err(Error::Missing(_))));
    }

    #[test]
    fn total_is_sum() {
        assert_eq!(total_loss(0.0, 0.0), 0.0);
        assert_eq!(total_loss(2.5, 0.0), 2.5);
        assert_eq!(total_loss(1.5, 2.5), 4.0);
    }
}
