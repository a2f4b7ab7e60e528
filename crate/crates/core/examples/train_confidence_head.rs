//! Train the confidence head on the bundled synthetic task and save it.
//!
//! cargo run --release --example train_confidence_head -- [steps] [lr] [out.bin]

use ppm_stereo::bench::bundled_confidence_task;
use ppm_stereo::confidence::{train_head, ConfidenceHead, DEFAULT_HIDDEN};
use ppm_stereo::PipelineConfig;

fn main() -> ppm_stereo::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(200, |s| s.parse().expect("steps"));
    let lr = args.next().map_or(0.5, |s| s.parse().expect("learning rate"));
    let config = PipelineConfig::default();
    let data = bundled_confidence_task(0, &config)?;
    let head = ConfidenceHead::seeded(config.channels, DEFAULT_HIDDEN, config.seed);
    let report = train_head(&head, &data, steps, lr)?;
    for (i, l) in report.losses.iter().enumerate().step_by((steps / 10).max(1)) {
        println!("step {i:>4}  loss {l:.5}");
    }
    println!(
        "initial {:.5} -> final {:.5} (ratio {:.3})",
        report.initial_loss(),
        report.final_loss(),
        report.final_loss() / report.initial_loss()
    );
    if let Some(path) = args.next() {
        report.head.save(&path)?;
        println!("saved head to {path}");
    }
    Ok(())
}
