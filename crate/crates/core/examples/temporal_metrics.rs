//! Accuracy and temporal-consistency metrics on hand-made sequences.
//!
//! cargo run --example temporal_metrics

use ppm_stereo::metrics::{evaluate, TemporalAggregation, DEFAULT_THRESHOLDS};
use ppm_stereo::FloatRaster;

fn frame(values: [f32; 4]) -> FloatRaster {
    FloatRaster::new(2, 2, 1, values.to_vec()).unwrap()
}

fn main() -> ppm_stereo::Result<()> {
    let gt = vec![
        frame([4.0, 4.0, 8.0, 8.0]),
        frame([4.5, 4.0, 8.0, 9.0]),
        frame([5.0, 4.0, 8.0, 10.0]),
    ];
    // a constant offset is inaccurate but perfectly stable
    let biased: Vec<FloatRaster> = gt
        .iter()
        .map(|g| frame(std::array::from_fn(|i| g.data()[i] + 2.0)))
        .collect();
    // unbiased on average but flickering
    let flicker: Vec<FloatRaster> = gt
        .iter()
        .enumerate()
        .map(|(t, g)| {
            let s = if t % 2 == 0 { 1.5 } else { -1.5 };
            frame(std::array::from_fn(|i| g.data()[i] + s))
        })
        .collect();

    for (name, pred) in [("biased", &biased), ("flicker", &flicker)] {
        for agg in [TemporalAggregation::PixelMean, TemporalAggregation::PerStep] {
            let r = evaluate(pred, &gt, &DEFAULT_THRESHOLDS, agg)?;
            println!("{name} ({agg:?})");
            print!("{}", r.to_table());
        }
    }
    Ok(())
}
