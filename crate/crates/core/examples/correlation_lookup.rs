//! Build a correlation volume from two frames, take the winner-take-all
//! disparity and sample a lookup window around it.
//!
//! cargo run --release --example correlation_lookup

use ppm_stereo::costvolume::{lookup, winner_take_all};
use ppm_stereo::features::box_downsample;
use ppm_stereo::metrics::epe;
use ppm_stereo::refine::{upsample_disparity, Encoder};
use ppm_stereo::synth::{generate_scene, random_scene_spec, RandomSceneParams};
use ppm_stereo::PipelineConfig;

fn main() -> ppm_stereo::Result<()> {
    let params = RandomSceneParams {
        frames: 1,
        corrupted_frames: 0,
        ..RandomSceneParams::default()
    };
    let video = generate_scene(&random_scene_spec(&params, 11)?, 11)?;
    let config = PipelineConfig::default();
    let encoder = Encoder::new(&config, video.width())?;
    let enc = encoder.encode(&video.frames()[0])?;
    let v = &enc.volume;
    println!(
        "volume {}x{} with {} candidate disparities",
        v.height(),
        v.width(),
        v.max_disparity()
    );

    let wta = winner_take_all(v);
    let window = lookup(v, &wta, config.radius)?;
    let (y, x) = (v.height() / 2, v.width() / 2);
    let taps: Vec<String> = window.at(y, x).iter().map(|c| format!("{c:.2}")).collect();
    println!(
        "token ({y}, {x}): d = {}, window [{}]",
        wta.get(y, x, 0),
        taps.join(" ")
    );

    let f = encoder.scale.factor();
    let gt = &video.gt_disparity().unwrap()[0];
    let full = upsample_disparity(&wta, encoder.scale, video.width(), video.height());
    println!("winner-take-all EPE at full resolution: {:.3}", epe(&full, gt)?);
    let truth = box_downsample(gt, encoder.scale);
    println!(
        "mean ground truth at token scale: {:.3} (in token units {:.3})",
        truth.mean(),
        truth.mean() / f as f64
    );
    Ok(())
}
