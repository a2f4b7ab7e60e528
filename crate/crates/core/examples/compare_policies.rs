//! Compare memory policies on a seeded suite of scenes with corrupted frames.
//!
//! cargo run --release --example compare_policies -- [scenes] [N] [policies]

use std::time::Instant;

use ppm_stereo::bench::{compare_policies, comparison_table, corruption_suite};
use ppm_stereo::refine::ConfidenceModel;
use ppm_stereo::synth::RandomSceneParams;
use ppm_stereo::{PipelineConfig, Policy};

fn main() -> ppm_stereo::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenes = args.next().map_or(4, |n| n.parse().expect("scene count"));
    let iterations = args.next().map_or(10, |n| n.parse().expect("N"));
    let policies = match args.next() {
        Some(list) => list
            .split(',')
            .map(str::parse)
            .collect::<ppm_stereo::Result<Vec<Policy>>>()?,
        None => Policy::ALL.to_vec(),
    };

    let suite = corruption_suite(scenes, 11, &RandomSceneParams::default())?;
    let config = PipelineConfig {
        iterations,
        ..PipelineConfig::default()
    };
    let model = ConfidenceModel::from_config(&config)?;
    let start = Instant::now();
    let reports = compare_policies(&suite, &config, &model, &policies)?;
    print!("{}", comparison_table(&reports));
    println!("{} scenes in {:.1?}", suite.len(), start.elapsed());
    Ok(())
}
