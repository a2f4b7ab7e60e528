//! One quality-assessment step by hand: score every frame, pick the top K,
//! weight and position-encode them, then read out the aggregated feature.
//!
//! cargo run --release --example pick_and_play

use ppm_stereo::confidence::frame_confidence;
use ppm_stereo::memory::{qam_step, read_out, PositionalTable, QamParams, Selection, SelectionCounters, VanillaMemory};
use ppm_stereo::refine::{ConfidenceModel, Encoder};
use ppm_stereo::synth::{generate_scene, random_scene_spec, RandomSceneParams};
use ppm_stereo::PipelineConfig;

fn main() -> ppm_stereo::Result<()> {
    let params = RandomSceneParams {
        frames: 8,
        corrupted_frames: 2,
        ..RandomSceneParams::default()
    };
    let spec = random_scene_spec(&params, 21)?;
    let video = generate_scene(&spec, 21)?;
    let config = PipelineConfig {
        k: 3,
        ..PipelineConfig::default()
    };
    let encoder = Encoder::new(&config, video.width())?;
    let model = ConfidenceModel::from_config(&config)?;

    let mut encodings = Vec::new();
    let mut confidence = Vec::new();
    for frame in video.frames() {
        let enc = encoder.encode(frame)?;
        let wta = ppm_stereo::costvolume::winner_take_all(&enc.volume);
        confidence.push(frame_confidence(&model.map(frame, &enc, &wta, encoder.scale)?));
        encodings.push(enc);
    }
    let memory = VanillaMemory::new(
        encodings.iter().map(|e| e.key.clone()).collect(),
        encodings.iter().map(|e| e.value.clone()).collect(),
    )?;
    println!("corrupted frames {:?}", spec.corrupted_frames());

    let target = 4;
    let table = PositionalTable::sinusoidal(video.len(), config.channels);
    let qam = QamParams {
        k: config.k,
        pool_factor: config.pool_factor,
        sequence_len: video.len(),
        play: true,
    };
    let mut counters = SelectionCounters::new(video.len());
    for n in 0..3 {
        let out = qam_step(
            &encodings[target].query,
            target,
            &memory,
            &mut counters,
            &confidence,
            &qam,
            Selection::TopK,
            &table,
        )?;
        let q = &out.quality;
        println!("iteration {n}");
        for i in 0..video.len() {
            println!(
                "  frame {i}: S^c {:.3}  sim {:+.3}  R {:.3}  S {:.3}",
                q.confidence[i], q.similarity[i], q.regularizer[i], q.total[i]
            );
        }
        let w = out.dynamic.weights.as_deref().unwrap_or_default();
        println!("  picked {:?} with weights {:.3?}", out.dynamic.indices, w);
        let agg = read_out(
            &out.query,
            &out.keys,
            &out.dynamic.values,
            &encodings[target].cost,
            config.alpha,
        )?;
        println!(
            "  aggregated feature mean {:.4} (cost alone {:.4})",
            agg.mean(),
            encodings[target].cost.mean()
        );
    }
    Ok(())
}
