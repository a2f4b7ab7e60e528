//! Generate a scene, run the full pipeline and report metrics and losses.
//!
//! cargo run --release --example run_pipeline -- [policy] [N]

use std::time::Instant;

use ppm_stereo::metrics::{evaluate, TemporalAggregation, DEFAULT_THRESHOLDS};
use ppm_stereo::synth::{generate_scene, random_scene_spec, RandomSceneParams};
use ppm_stereo::{run_sequence, PipelineConfig, Policy};

fn main() -> ppm_stereo::Result<()> {
    let mut args = std::env::args().skip(1);
    let policy: Policy = args.next().as_deref().unwrap_or("ppm").parse()?;
    let iterations = args.next().map_or(10, |n| n.parse().expect("N is an integer"));

    let spec = random_scene_spec(&RandomSceneParams::default(), 3)?;
    let video = generate_scene(&spec, 3)?;
    let config = PipelineConfig {
        policy,
        iterations,
        ..PipelineConfig::default()
    };

    let start = Instant::now();
    let out = run_sequence(&video, &config)?;
    println!(
        "{} frames, N = {iterations}, policy {policy}: {:.2?}",
        video.len(),
        start.elapsed()
    );
    println!("corrupted frames: {:?}", spec.corrupted_frames());
    let conf: Vec<String> = out.frame_confidence.iter().map(|c| format!("{c:.3}")).collect();
    println!("frame confidence: {}", conf.join(" "));
    if let Some(l) = out.losses {
        println!(
            "L_d = {:.3}  L_conf = {:.3}  L_total = {:.3}",
            l.disparity, l.confidence, l.total
        );
    }
    let gt = video.gt_disparity().expect("generated scenes carry ground truth");
    let report = evaluate(
        &out.disparities,
        gt,
        &DEFAULT_THRESHOLDS,
        TemporalAggregation::PixelMean,
    )?;
    print!("{}", report.to_table());
    Ok(())
}
