//! Accuracy and temporal-consistency metrics over disparity sequences.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::FloatRaster;

pub const DEFAULT_THRESHOLDS: [f64; 2] = [1.0, 3.0];

/// How per-step temporal errors are reduced before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalAggregation {
    /// Average each pixel's temporal error over time, then threshold.
    #[default]
    PixelMean,
    /// Threshold every (step, pixel) pair.
    PerStep,
}

fn check_pair(pred: &FloatRaster, gt: &FloatRaster) -> Result<()> {
    if !pred.same_shape(gt) || pred.channels() != 1 {
        return Err(Error::Shape(format!(
            "prediction {}x{}x{} vs ground truth {}x{}x{}",
            pred.width(),
            pred.height(),
            pred.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    Ok(())
}

fn check_sequences(pred: &[FloatRaster], gt: &[FloatRaster]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "{} predicted frames, {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Missing("no frames to evaluate".into()));
    }
    pred.iter().zip(gt).try_for_each(|(p, g)| check_pair(p, g))
}

fn abs_errors<'a>(pred: &'a FloatRaster, gt: &'a FloatRaster) -> impl Iterator<Item = f64> + 'a {
    pred.data()
        .iter()
        .zip(gt.data())
        .map(|(p, g)| (*p as f64 - *g as f64).abs())
}

/// Mean `|d - d̂|` over the pixels of one frame.
pub fn epe(pred: &FloatRaster, gt: &FloatRaster) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(abs_errors(pred, gt).sum::<f64>() / pred.data().len() as f64)
}

/// Fraction of pixels with `|d - d̂| > n`.
pub fn delta_npx(pred: &FloatRaster, gt: &FloatRaster, n: f64) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(abs_errors(pred, gt).filter(|&e| e > n).count() as f64 / pred.data().len() as f64)
}

/// `|Δd - Δd̂|` for every step `t → t+1` and pixel, as `[step][pixel]`.
fn temporal_errors(pred: &[FloatRaster], gt: &[FloatRaster]) -> Result<Vec<Vec<f64>>> {
    check_sequences(pred, gt)?;
    if pred.len() < 2 {
        return Err(Error::Missing("temporal metrics need at least two frames".into()));
    }
    Ok((0..pred.len() - 1)
        .map(|t| {
            let (p0, p1, g0, g1) = (pred[t].data(), pred[t + 1].data(), gt[t].data(), gt[t + 1].data());
            (0..p0.len())
                .map(|i| {
                    let dp = p1[i] as f64 - p0[i] as f64;
                    let dg = g1[i] as f64 - g0[i] as f64;
                    (dp - dg).abs()
                })
                .collect()
        })
        .collect())
}

/// Mean over steps and pixels of `|(d_{t+1} - d_t) - (d̂_{t+1} - d̂_t)|`.
pub fn tepe(pred: &[FloatRaster], gt: &[FloatRaster]) -> Result<f64> {
    let errs = temporal_errors(pred, gt)?;
    let count = errs.len() * errs[0].len();
    Ok(errs.iter().flatten().sum::<f64>() / count as f64)
}

/// Fraction of pixels whose temporal error exceeds `n`.
pub fn delta_t_npx(pred: &[FloatRaster], gt: &[FloatRaster], n: f64, aggregation: TemporalAggregation) -> Result<f64> {
    let errs = temporal_errors(pred, gt)?;
    let steps = errs.len() as f64;
    let pixels = errs[0].len();
    Ok(match aggregation {
        TemporalAggregation::PixelMean => {
            let over = (0..pixels)
                .filter(|&i| errs.iter().map(|s| s[i]).sum::<f64>() / steps > n)
                .count();
            over as f64 / pixels as f64
        }
        TemporalAggregation::PerStep => {
            let over = errs.iter().flatten().filter(|&&e| e > n).count();
            over as f64 / (steps * pixels as f64)
        }
    })
}

fn threshold_key(n: f64) -> String {
    format!("{n}px")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub valid_pixels: usize,
    pub epe: f64,
    pub delta_npx: BTreeMap<String, f64>,
    /// Absent for single-frame sequences.
    pub tepe: Option<f64>,
    pub delta_t_npx: BTreeMap<String, f64>,
    pub aggregation: TemporalAggregation,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("frames".into(), self.frames.to_string()),
            ("valid pixels".into(), self.valid_pixels.to_string()),
            ("EPE".into(), format!("{:.6}", self.epe)),
        ];
        rows.extend(
            self.delta_npx
                .iter()
                .map(|(k, v)| (format!("delta {k}"), format!("{v:.6}"))),
        );
        rows.push(("TEPE".into(), self.tepe.map_or("n/a".into(), |v| format!("{v:.6}"))));
        rows.extend(
            self.delta_t_npx
                .iter()
                .map(|(k, v)| (format!("delta_t {k}"), format!("{v:.6}"))),
        );
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>12}");
        }
        out
    }
}

/// Sequence report: EPE and `δ_npx` pooled over all frames and pixels, plus
/// the temporal metrics when there are at least two frames.
pub fn evaluate(
    pred: &[FloatRaster],
    gt: &[FloatRaster],
    thresholds: &[f64],
    aggregation: TemporalAggregation,
) -> Result<MetricsReport> {
    check_sequences(pred, gt)?;
    let pixels = pred[0].data().len();
    let total = (pixels * pred.len()) as f64;
    let all: Vec<f64> = pred.iter().zip(gt).flat_map(|(p, g)| abs_errors(p, g)).collect();
    let epe = all.iter().sum::<f64>() / total;
    let delta_npx = thresholds
        .iter()
        .map(|&n| (threshold_key(n), all.iter().filter(|&&e| e > n).count() as f64 / total))
        .collect();
    let (tepe, delta_t_npx) = if pred.len() >= 2 {
        let dt = thresholds
            .iter()
            .map(|&n| Ok((threshold_key(n), delta_t_npx(pred, gt, n, aggregation)?)))
            .collect::<Result<_>>()?;
        (Some(tepe(pred, gt)?), dt)
    } else {
        (None, BTreeMap::new())
    };
    Ok(MetricsReport {
        frames: pred.len(),
        valid_pixels: pixels,
        epe,
        delta_npx,
        tepe,
        delta_t_npx,
        aggregation,
    })
}
