//! Memory-policy comparison over a seeded suite of generated scenes.

use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use crate::confidence::gt_confidence;
use crate::config::{PipelineConfig, Policy};
use crate::costvolume::winner_take_all;
use crate::error::{Error, Result, ResultExt};
use crate::features::box_downsample;
use crate::grid::TokenGrid;
use crate::metrics::{evaluate, TemporalAggregation, DEFAULT_THRESHOLDS};
use crate::refine::{run_sequence_with, ConfidenceModel, Encoder};
use crate::seed::{derive_seed, tags};
use crate::synth::{generate_scene, random_scene_spec, RandomSceneParams};
use crate::video::StereoVideoSequence;

/// A generated sequence and the frames whose right view was corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteScene {
    pub name: String,
    pub sequence: StereoVideoSequence,
    pub corrupted: Vec<usize>,
}

/// `count` random scenes; scene `i` is drawn from a seed derived from
/// `(seed, i)`.
pub fn corruption_suite(count: usize, seed: u64, params: &RandomSceneParams) -> Result<Vec<SuiteScene>> {
    (0..count)
        .map(|i| {
            let scene_seed = derive_seed(seed, tags::SUITE + i as u64);
            let spec = random_scene_spec(params, scene_seed)?;
            Ok(SuiteScene {
                name: format!("scene_{i:03}"),
                sequence: generate_scene(&spec, scene_seed)?,
                corrupted: spec.corrupted_frames(),
            })
        })
        .collect()
}

/// Training pairs `(v_t, û_t)` for the confidence head: the value embedding
/// of every frame and the ground-truth confidence of its winner-take-all
/// disparity.
pub fn confidence_dataset(scenes: &[SuiteScene], config: &PipelineConfig) -> Result<Vec<(TokenGrid, TokenGrid)>> {
    let mut out = Vec::new();
    for scene in scenes {
        let seq = &scene.sequence;
        let gt = seq
            .gt_disparity()
            .ok_or_else(|| Error::Missing(format!("{} has no ground truth", scene.name)))?;
        let encoder = Encoder::new(config, seq.width())?;
        let f = encoder.scale.factor() as f64;
        for (frame, truth) in seq.frames().iter().zip(gt) {
            let enc = encoder.encode(frame)?;
            let d = winner_take_all(&enc.volume).scaled(f);
            let target = gt_confidence(&d, &box_downsample(truth, encoder.scale), config.sigma)?;
            out.push((enc.value, target));
        }
    }
    Ok(out)
}

/// The reproducible head-training task: two small scenes (32×32, six
/// frames, two of them corrupted).
pub fn bundled_confidence_task(seed: u64, config: &PipelineConfig) -> Result<Vec<(TokenGrid, TokenGrid)>> {
    let params = RandomSceneParams {
        width: 32,
        height: 32,
        frames: 6,
        rects: 2,
        corrupted_frames: 2,
        corruption_amplitude: 0.5,
        max_disparity: 12,
    };
    confidence_dataset(&corruption_suite(2, seed, &params)?, config)
}

/// Aggregate results of one policy over the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: Policy,
    pub scenes: usize,
    pub epe: f64,
    pub delta_1px: f64,
    pub delta_3px: f64,
    pub tepe: f64,
    pub delta_t_1px: f64,
    pub delta_t_3px: f64,
    /// Frame selections summed over every (scene, t, n).
    pub selections: usize,
    pub corrupted_selections: usize,
    /// `corrupted_selections / selections`.
    pub corrupted_rate: f64,
}

/// Runs every policy on every scene with otherwise identical settings and
/// averages the per-scene metrics.
pub fn compare_policies(
    scenes: &[SuiteScene],
    base: &PipelineConfig,
    model: &ConfidenceModel,
    policies: &[Policy],
) -> Result<Vec<PolicyReport>> {
    policies
        .iter()
        .map(|&policy| {
            let config = PipelineConfig { policy, ..base.clone() };
            let mut report = PolicyReport {
                policy,
                scenes: scenes.len(),
                epe: 0.0,
                delta_1px: 0.0,
                delta_3px: 0.0,
                tepe: 0.0,
                delta_t_1px: 0.0,
                delta_t_3px: 0.0,
                selections: 0,
                corrupted_selections: 0,
                corrupted_rate: 0.0,
            };
            let mut temporal_scenes = 0usize;
            for scene in scenes {
                let out = run_sequence_with(&scene.sequence, &config, model)
                    .context_with(|| format!("policy {policy}, {}", scene.name))?;
                for rec in &out.traces {
                    report.selections += rec.selected.len();
                    report.corrupted_selections += rec.selected.iter().filter(|i| scene.corrupted.contains(i)).count();
                }
                if let Some(gt) = scene.sequence.gt_disparity() {
                    let gt = &gt[..out.disparities.len()];
                    let m = evaluate(
                        &out.disparities,
                        gt,
                        &DEFAULT_THRESHOLDS,
                        TemporalAggregation::PixelMean,
                    )?;
                    report.epe += m.epe;
                    report.delta_1px += m.delta_npx["1px"];
                    report.delta_3px += m.delta_npx["3px"];
                    if let Some(t) = m.tepe {
                        temporal_scenes += 1;
                        report.tepe += t;
                        report.delta_t_1px += m.delta_t_npx["1px"];
                        report.delta_t_3px += m.delta_t_npx["3px"];
                    }
                }
            }
            let n = scenes.len().max(1) as f64;
            let nt = temporal_scenes.max(1) as f64;
            report.epe /= n;
            report.delta_1px /= n;
            report.delta_3px /= n;
            report.tepe /= nt;
            report.delta_t_1px /= nt;
            report.delta_t_3px /= nt;
            report.corrupted_rate = if report.selections == 0 {
                0.0
            } else {
                report.corrupted_selections as f64 / report.selections as f64
            };
            info!("{policy}: corrupted-frame rate {:.4}", report.corrupted_rate);
            Ok(report)
        })
        .collect()
}

const COLUMNS: [&str; 9] = [
    "policy",
    "EPE",
    "d1px",
    "d3px",
    "TEPE",
    "dt1px",
    "dt3px",
    "selections",
    "corrupt_rate",
];

fn row(r: &PolicyReport) -> [String; 9] {
    [
        r.policy.to_string(),
        format!("{:.4}", r.epe),
        format!("{:.4}", r.delta_1px),
        format!("{:.4}", r.delta_3px),
        format!("{:.4}", r.tepe),
        format!("{:.4}", r.delta_t_1px),
        format!("{:.4}", r.delta_t_3px),
        r.selections.to_string(),
        format!("{:.4}", r.corrupted_rate),
    ]
}

/// Aligned plain-text comparison table.
pub fn comparison_table(reports: &[PolicyReport]) -> String {
    let rows: Vec<[String; 9]> = reports.iter().map(row).collect();
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([COLUMNS[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", line(COLUMNS.to_vec()));
    for r in &rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn comparison_csv(reports: &[PolicyReport]) -> String {
    let mut out = COLUMNS.join(",") + "\n";
    for r in reports {
        out += &row(r).join(",");
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(policy: Policy, rate: f64) -> PolicyReport {
        PolicyReport {
            policy,
            scenes: 1,
            epe: 1.0,
            delta_1px: 0.5,
            delta_3px: 0.25,
            tepe: 0.125,
            delta_t_1px: 0.0,
            delta_t_3px: 0.0,
            selections: 10,
            corrupted_selections: 1,
            corrupted_rate: rate,
        }
    }

    #[test]
    fn suite_is_reproducible() {
        let params = RandomSceneParams {
            frames: 4,
            corrupted_frames: 1,
            ..Default::default()
        };
        let a = corruption_suite(2, 7, &params).unwrap();
        let b = corruption_suite(2, 7, &params).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].sequence, a[1].sequence);
        assert!(a.iter().all(|s| s.corrupted.len() == 1));
    }

    #[test]
    fn table_and_csv() {
        let reports = [report(Policy::Random, 0.1), report(Policy::PickOnly, 0.0)];
        let table = comparison_table(&reports);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[2].starts_with("pick-only"));
        let csv = comparison_csv(&reports);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "random,1.0000,0.5000,0.2500,0.1250,0.0000,0.0000,10,0.1000"
        );
    }
}
