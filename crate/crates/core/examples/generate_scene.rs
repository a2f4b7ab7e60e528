//! Render a synthetic stereo video to PFM files plus a manifest.
//!
//! cargo run --example generate_scene -- [out_dir] [seed]

use std::path::PathBuf;

use ppm_stereo::synth::{generate_scene, Corruption, RectSpec, SceneSpec};
use ppm_stereo::video::write_sequence;

fn main() -> ppm_stereo::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scene_out".into()));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed is an integer"));

    let spec = SceneSpec {
        width: 64,
        height: 48,
        frames: 6,
        background_disparity: 2,
        rects: vec![
            RectSpec {
                x: 8,
                y: 8,
                width: 16,
                height: 12,
                disparity: 10,
                velocity: (2, 0),
            },
            RectSpec {
                x: 36,
                y: 24,
                width: 12,
                height: 12,
                disparity: 6,
                velocity: (-1, 1),
            },
        ],
        corruptions: vec![Corruption {
            frame: 3,
            amplitude: 0.5,
        }],
        texture_cell: 2,
    };
    let video = generate_scene(&spec, seed)?;
    let manifest = write_sequence(&out, &video, &spec.corrupted_frames())?;
    println!(
        "wrote {} frames of {}x{} to {}",
        manifest.frames.len(),
        manifest.width,
        manifest.height,
        out.display()
    );
    println!("corrupted: {:?}", manifest.corrupted);
    for (t, d) in video.gt_disparity().unwrap().iter().enumerate() {
        let max = d.data().iter().copied().fold(f32::MIN, f32::max);
        println!("frame {t}: max disparity {max}");
    }
    Ok(())
}
