//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ppm_stereo::bench::{compare_policies, corruption_suite};
use ppm_stereo::cli::{cmd_generate, cmd_run, disparity_file};
use ppm_stereo::confidence::{confidence_grad, confidence_loss, gt_confidence, ConfidenceHead};
use ppm_stereo::grid::TokenGrid;
use ppm_stereo::memory::{
    modulate, play_weights, qam_step, quality_scores, read_out, redundancy_regularizer, relevance_score,
    similarity_score, CounterMode, DynamicMemory, PositionalTable, QamParams, Selection, SelectionCounters,
    VanillaMemory,
};
use ppm_stereo::metrics::{delta_npx, delta_t_npx, epe, tepe, TemporalAggregation};
use ppm_stereo::refine::{disparity_loss, run_sequence, ConfidenceModel, Encoder};
use ppm_stereo::synth::{generate_scene, random_scene_spec, RandomSceneParams};
use ppm_stereo::trace::TraceRecord;
use ppm_stereo::{FloatRaster, PipelineConfig, Policy};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn grid(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> TokenGrid {
    TokenGrid::from_fn(h, w, c, |_, _, _| rng.random_range(-1.0..1.0))
}

// ---- straight-loop oracles ----

fn oracle_confidence(d: &TokenGrid, g: &TokenGrid, sigma: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..d.height() {
        for x in 0..d.width() {
            let diff = d.get(y, x, 0) - g.get(y, x, 0);
            out.push((-diff.abs() / sigma).exp());
        }
    }
    out
}

fn oracle_phi(g: &TokenGrid, p: usize) -> Vec<f64> {
    let (h, w, c) = g.shape();
    let ph = h.div_ceil(p);
    let pw = w.div_ceil(p);
    let mut v = Vec::new();
    for py in 0..ph {
        for px in 0..pw {
            for ch in 0..c {
                let mut s = 0.0;
                for dy in 0..p {
                    for dx in 0..p {
                        let y = (py * p + dy).min(h - 1);
                        let x = (px * p + dx).min(w - 1);
                        s += g.get(y, x, ch);
                    }
                }
                v.push(s / (p * p) as f64);
            }
        }
    }
    let mut norm = 0.0;
    for x in &v {
        norm += x * x;
    }
    let norm = norm.sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    v
}

fn oracle_similarity(q: &TokenGrid, keys: &[TokenGrid], p: usize) -> Vec<f64> {
    let a = oracle_phi(q, p);
    keys.iter()
        .map(|k| {
            let b = oracle_phi(k, p);
            let mut s = 0.0;
            for i in 0..a.len() {
                s += a[i] * b[i];
            }
            s
        })
        .collect()
}

fn oracle_weights(scores: &[f64], idx: &[usize]) -> Vec<f64> {
    let mut total = 0.0;
    for &i in idx {
        total += if scores[i] > 1e-6 { scores[i] } else { 1e-6 };
    }
    idx.iter()
        .map(|&i| (if scores[i] > 1e-6 { scores[i] } else { 1e-6 }) / total)
        .collect()
}

fn oracle_attention(q: &TokenGrid, keys: &[TokenGrid], values: &[TokenGrid], cost: &TokenGrid, alpha: f64) -> Vec<f64> {
    let c = q.channels();
    let vc = values[0].channels();
    let mut out = Vec::new();
    for y in 0..q.height() {
        for x in 0..q.width() {
            let mut logits = Vec::new();
            let mut vals = Vec::new();
            for (k, v) in keys.iter().zip(values) {
                for ky in 0..k.height() {
                    for kx in 0..k.width() {
                        let mut s = 0.0;
                        for ch in 0..c {
                            s += q.get(y, x, ch) * k.get(ky, kx, ch);
                        }
                        logits.push(s / (c as f64).sqrt());
                        vals.push((0..vc).map(|ch| v.get(ky, kx, ch)).collect::<Vec<_>>());
                    }
                }
            }
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for ch in 0..vc {
                let mut acc = 0.0;
                for (l, v) in logits.iter().zip(&vals) {
                    acc += l.exp() / z * v[ch];
                }
                out.push(cost.get(y, x, ch) + alpha * acc);
            }
        }
    }
    out
}

fn equation_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = [0.0f64; 6];
    let cases = 100;
    for _ in 0..cases {
        let h = rng.random_range(1..=16);
        let w = rng.random_range(1..=16);
        let c = rng.random_range(1..=6);
        let frames = rng.random_range(1..=8usize);
        let pool = rng.random_range(1..=4);
        let sigma = rng.random_range(0.5..8.0);

        let d = TokenGrid::from_fn(h, w, 1, |_, _, _| rng.random_range(0.0..30.0));
        let g = TokenGrid::from_fn(h, w, 1, |_, _, _| rng.random_range(0.0..30.0));
        let u = gt_confidence(&d, &g, sigma).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(max_abs(u.data(), &oracle_confidence(&d, &g, sigma)));

        let keys: Vec<TokenGrid> = (0..frames).map(|_| grid(&mut rng, h, w, c)).collect();
        let values: Vec<TokenGrid> = (0..frames).map(|_| grid(&mut rng, h, w, c)).collect();
        let q = grid(&mut rng, h, w, c);
        let memory = VanillaMemory::new(keys.clone(), values.clone()).map_err(|e| e.to_string())?;
        let sim = similarity_score(&q, &memory, pool).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max(max_abs(&sim, &oracle_similarity(&q, &keys, pool)));

        let counters: Vec<u32> = (0..frames).map(|_| rng.random_range(0..20)).collect();
        let conf: Vec<f64> = (0..frames).map(|_| rng.random_range(0.0..1.0)).collect();
        let r = redundancy_regularizer(&counters, frames);
        let s = quality_scores(&conf, &relevance_score(&sim, &r));
        let oracle_s: Vec<f64> = (0..frames)
            .map(|i| conf[i] + (-(counters[i] as f64) / frames as f64).exp() * sim[i])
            .collect();
        worst[2] = worst[2].max(max_abs(&s, &oracle_s));

        let k = rng.random_range(1..=frames);
        let mut idx: Vec<usize> = (0..frames).collect();
        for i in 0..k {
            let j = rng.random_range(i..frames);
            idx.swap(i, j);
        }
        let mut idx = idx[..k].to_vec();
        idx.sort_unstable();
        let weights = play_weights(&s, &idx).map_err(|e| e.to_string())?;
        worst[3] = worst[3].max(max_abs(&weights, &oracle_weights(&s, &idx)));

        let table = PositionalTable::sinusoidal(frames, c);
        let target = rng.random_range(0..frames);
        let dynamic = DynamicMemory {
            indices: idx.clone(),
            keys: idx.iter().map(|&i| keys[i].clone()).collect(),
            values: idx.iter().map(|&i| values[i].clone()).collect(),
            weights: Some(weights.clone()),
        };
        let (mq, mk) = modulate(&q, target, &dynamic, &table).map_err(|e| e.to_string())?;
        let pe = |frame: usize, ch: usize| {
            let rate = 10000f64.powf(-2.0 * (ch / 2) as f64 / c as f64);
            let p = (frame + 1) as f64 * rate;
            if ch.is_multiple_of(2) {
                p.sin()
            } else {
                p.cos()
            }
        };
        let mut oracle_mod = Vec::new();
        let mut ours = mq.data().to_vec();
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    oracle_mod.push(q.get(y, x, ch) + pe(target, ch));
                }
            }
        }
        for (slot, &i) in idx.iter().enumerate() {
            ours.extend_from_slice(mk[slot].data());
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        oracle_mod.push(weights[slot] * keys[i].get(y, x, ch) + pe(i, ch));
                    }
                }
            }
        }
        worst[4] = worst[4].max(max_abs(&ours, &oracle_mod));

        let alpha = rng.random_range(0.0..2.0);
        let cost = grid(&mut rng, h, w, c);
        let vals: Vec<TokenGrid> = idx.iter().map(|&i| values[i].clone()).collect();
        let f = read_out(&mq, &mk, &vals, &cost, alpha).map_err(|e| e.to_string())?;
        worst[5] = worst[5].max(max_abs(f.data(), &oracle_attention(&mq, &mk, &vals, &cost, alpha)));
    }
    let elapsed = start.elapsed();
    let names = ["confidence", "similarity", "score", "weights", "modulation", "read-out"];
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(worst.iter().all(|&w| w <= 1e-5), || {
        format!("max-abs above 1e-5: {detail}")
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} cases each; {detail}; {:.2}s", elapsed.as_secs_f64()))
}

fn loss_weights() -> Outcome {
    let expected = (1.0 - 0.9f64.powi(10)) / 0.1;
    let maps = vec![vec![TokenGrid::filled(3, 4, 1, 0.25); 10]];
    let targets = vec![vec![TokenGrid::filled(3, 4, 1, 1.25); 10]];
    let lc = confidence_loss(&maps, &targets, 0.9).map_err(|e| e.to_string())?;
    let gt = vec![FloatRaster::filled(5, 3, 1, 2.0)];
    let preds = vec![vec![FloatRaster::filled(5, 3, 1, 3.0); 10]];
    let ld = disparity_loss(&preds, Some(&gt), 0.9).map_err(|e| e.to_string())?;
    ensure((lc - 6.513216).abs() <= 1e-6, || format!("L_conf = {lc}"))?;
    ensure((ld - 6.513216).abs() <= 1e-6, || format!("L_d = {ld}"))?;
    Ok(format!("L_conf {lc:.7}, L_d {ld:.7}, geometric series {expected:.7}"))
}

fn small_config() -> PipelineConfig {
    PipelineConfig {
        k: 3,
        iterations: 4,
        ..PipelineConfig::default()
    }
}

fn suite_params(frames: usize, corrupted: usize) -> RandomSceneParams {
    RandomSceneParams {
        width: 48,
        height: 32,
        frames,
        corrupted_frames: corrupted,
        max_disparity: 16,
        ..RandomSceneParams::default()
    }
}

fn alpha_identity() -> Outcome {
    let scenes = corruption_suite(5, 31, &suite_params(5, 1)).map_err(|e| e.to_string())?;
    for s in &scenes {
        let zero = run_sequence(
            &s.sequence,
            &PipelineConfig {
                alpha: 0.0,
                ..small_config()
            },
        )
        .map_err(|e| e.to_string())?;
        let off = run_sequence(
            &s.sequence,
            &PipelineConfig {
                memory: false,
                ..small_config()
            },
        )
        .map_err(|e| e.to_string())?;
        let bits = |o: &ppm_stereo::RunOutput| {
            o.iterations
                .iter()
                .flatten()
                .flat_map(|g| g.data().iter().map(|v| v.to_bits()))
                .chain(
                    o.disparities
                        .iter()
                        .flat_map(|d| d.data().iter().map(|v| v.to_bits() as u64)),
                )
                .collect::<Vec<u64>>()
        };
        ensure(bits(&zero) == bits(&off), || format!("{} differs", s.name))?;
        ensure(!zero.traces.is_empty() && off.traces.is_empty(), || {
            "memory was not exercised".into()
        })?;
    }
    Ok(format!("{} scenes bit-identical over all iterations", scenes.len()))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn buffer_and_efficiency() -> Outcome {
    let params = RandomSceneParams {
        frames: 20,
        ..RandomSceneParams::default()
    };
    let spec = random_scene_spec(&params, 4).map_err(|e| e.to_string())?;
    let video = generate_scene(&spec, 4).map_err(|e| e.to_string())?;
    let config = PipelineConfig {
        k: 5,
        ..PipelineConfig::default()
    };
    let encoder = Encoder::new(&config, video.width()).map_err(|e| e.to_string())?;
    let encodings = video
        .frames()
        .iter()
        .map(|f| encoder.encode(f))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let memory = VanillaMemory::new(
        encodings.iter().map(|e| e.key.clone()).collect(),
        encodings.iter().map(|e| e.value.clone()).collect(),
    )
    .map_err(|e| e.to_string())?;
    let (sh, sw) = (encodings[0].key.height(), encodings[0].key.width());
    ensure((sh, sw) == (16, 16), || format!("token grid {sh}x{sw}"))?;
    let table = PositionalTable::sinusoidal(20, config.channels);
    let conf = vec![0.5; 20];
    let target = 7;
    let step = |k: usize, selection: Selection<'_>| {
        let mut counters = SelectionCounters::new(20);
        let params = QamParams {
            k,
            pool_factor: config.pool_factor,
            sequence_len: 20,
            play: true,
        };
        qam_step(
            &encodings[target].query,
            target,
            &memory,
            &mut counters,
            &conf,
            &params,
            selection,
            &table,
        )
    };
    let ppm = step(5, Selection::TopK).map_err(|e| e.to_string())?;
    let full = step(20, Selection::All).map_err(|e| e.to_string())?;
    ensure(ppm.dynamic.token_count() == 5 * sh * sw, || {
        format!("{} tokens", ppm.dynamic.token_count())
    })?;
    ensure(full.dynamic.token_count() == 20 * sh * sw, || {
        format!("{} tokens", full.dynamic.token_count())
    })?;

    let cost = &encodings[target].cost;
    let time = |out: &ppm_stereo::memory::QamOutput| -> Result<Duration, String> {
        let mut runs = Vec::with_capacity(50);
        for _ in 0..50 {
            let start = Instant::now();
            let f = read_out(&out.query, &out.keys, &out.dynamic.values, cost, 0.5).map_err(|e| e.to_string())?;
            runs.push(start.elapsed());
            std::hint::black_box(f);
        }
        Ok(median(runs))
    };
    let t_ppm = time(&ppm)?;
    let t_full = time(&full)?;
    let speedup = t_full.as_secs_f64() / t_ppm.as_secs_f64();
    ensure(speedup >= 2.0, || format!("speedup {speedup:.2}x"))?;
    Ok(format!(
        "{} tokens (5x{sh}x{sw}); median read-out K=5 {:.2} ms vs K=20 {:.2} ms, {speedup:.2}x",
        ppm.dynamic.token_count(),
        t_ppm.as_secs_f64() * 1e3,
        t_full.as_secs_f64() * 1e3
    ))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let channels = rng.random_range(2..=6);
        let hidden = rng.random_range(2..=6);
        let head = ConfidenceHead::seeded(channels, hidden, case);
        let v = grid(&mut rng, 8, 8, channels);
        // targets at 0 or 1 keep |u - û| away from its kink
        let target = TokenGrid::from_fn(8, 8, 1, |_, _, _| if rng.random_bool(0.5) { 0.0 } else { 1.0 });
        let (_, grads) = confidence_grad(&head, &v, &target).map_err(|e| e.to_string())?;
        let analytic = grads.flatten();
        let base = head.parameters();
        let loss = |p: &[f64]| -> Result<f64, String> {
            let mut h = head.clone();
            h.set_parameters(p).map_err(|e| e.to_string())?;
            let u = h.forward(&v).map_err(|e| e.to_string())?;
            let n = u.data().len() as f64;
            Ok(u.data()
                .iter()
                .zip(target.data())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / n)
        };
        let h = 1e-3;
        let mut numeric = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            let plus = loss(&p)?;
            p[i] = base[i] - h;
            let minus = loss(&p)?;
            numeric.push((plus - minus) / (2.0 * h));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-4, || format!("relative error {worst:.2e}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "20 cases, worst relative error {worst:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn raster(values: Vec<f32>, w: usize) -> FloatRaster {
    let h = values.len() / w;
    FloatRaster::new(w, h, 1, values).unwrap()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let w = rng.random_range(1..=12);
        let h = rng.random_range(1..=12);
        let t = rng.random_range(2..=6);
        // multiples of 1/8 keep every f32 sum exact
        let mut draw = || -> Vec<FloatRaster> {
            (0..t)
                .map(|_| raster((0..w * h).map(|_| rng.random_range(0..256) as f32 / 8.0).collect(), w))
                .collect()
        };
        let pred = draw();
        let gt = draw();
        let n = (w * h) as f64;
        for thr in [0.5, 1.0, 3.0] {
            let mut e_sum = 0.0;
            let mut e_over = 0;
            for i in 0..w * h {
                let e = (pred[0].data()[i] as f64 - gt[0].data()[i] as f64).abs();
                e_sum += e;
                if e > thr {
                    e_over += 1;
                }
            }
            worst = worst.max((epe(&pred[0], &gt[0]).unwrap() - e_sum / n).abs());
            worst = worst.max((delta_npx(&pred[0], &gt[0], thr).unwrap() - e_over as f64 / n).abs());

            let mut sum = 0.0;
            let mut per_step_over = 0;
            let mut per_pixel_over = 0;
            for i in 0..w * h {
                let mut pixel = 0.0;
                for s in 0..t - 1 {
                    let dp = pred[s + 1].data()[i] as f64 - pred[s].data()[i] as f64;
                    let dg = gt[s + 1].data()[i] as f64 - gt[s].data()[i] as f64;
                    let e = (dp - dg).abs();
                    sum += e;
                    pixel += e;
                    if e > thr {
                        per_step_over += 1;
                    }
                }
                if pixel / (t - 1) as f64 > thr {
                    per_pixel_over += 1;
                }
            }
            let steps = (t - 1) as f64;
            worst = worst.max((tepe(&pred, &gt).unwrap() - sum / (n * steps)).abs());
            worst = worst.max(
                (delta_t_npx(&pred, &gt, thr, TemporalAggregation::PerStep).unwrap()
                    - per_step_over as f64 / (n * steps))
                    .abs(),
            );
            worst = worst.max(
                (delta_t_npx(&pred, &gt, thr, TemporalAggregation::PixelMean).unwrap() - per_pixel_over as f64 / n)
                    .abs(),
            );
        }
        let offset = rng.random_range(-64..64) as f32 / 4.0;
        let shifted: Vec<FloatRaster> = pred
            .iter()
            .map(|p| raster(p.data().iter().map(|v| v + offset).collect(), w))
            .collect();
        let a = tepe(&pred, &gt).unwrap();
        let b = tepe(&shifted, &gt).unwrap();
        ensure(a == b, || format!("TEPE {a} changed to {b} under offset {offset}"))?;
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:.2e}"))?;
    Ok(format!(
        "50 sequences, max deviation {worst:.1e}, TEPE offset-invariant"
    ))
}

fn corruption_avoidance() -> Outcome {
    let start = Instant::now();
    let scenes = corruption_suite(30, 2024, &RandomSceneParams::default()).map_err(|e| e.to_string())?;
    ensure(scenes.iter().all(|s| s.corrupted.len() == 3), || {
        "scene without three corrupted frames".into()
    })?;
    let config = PipelineConfig {
        k: 5,
        iterations: 10,
        ..PipelineConfig::default()
    };
    let model = ConfidenceModel::from_config(&config).map_err(|e| e.to_string())?;
    let reports =
        compare_policies(&scenes, &config, &model, &[Policy::Random, Policy::Ppm]).map_err(|e| e.to_string())?;
    let (random, ppm) = (reports[0].corrupted_rate, reports[1].corrupted_rate);
    let elapsed = start.elapsed();
    ensure(random > 0.0 && ppm <= 0.5 * random, || {
        format!("ppm {ppm:.4} vs random {random:.4}")
    })?;
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "30 scenes, corrupted-frame rate ppm {ppm:.4} vs random {random:.4}, {:.0}s",
        elapsed.as_secs_f64()
    ))
}

fn counter_laws() -> Outcome {
    let r = redundancy_regularizer(&[0, 20], 20);
    ensure(r[0] == 1.0 && (r[1] - (-1f64).exp()).abs() <= 1e-9, || {
        format!("R = {r:?}")
    })?;

    let scene = corruption_suite(1, 88, &suite_params(4, 1))
        .map_err(|e| e.to_string())?
        .remove(0);
    let frames = scene.sequence.len();
    let mut checked = 0;
    for mode in [CounterMode::Reset, CounterMode::Persist] {
        let config = PipelineConfig {
            counter_mode: mode,
            k: 2,
            ..small_config()
        };
        let out = run_sequence(&scene.sequence, &config).map_err(|e| e.to_string())?;
        let mut counts = vec![0u32; frames];
        let mut current = None;
        for rec in &out.traces {
            if mode == CounterMode::Reset && current != Some(rec.t) {
                counts = vec![0; frames];
            }
            current = Some(rec.t);
            check_regularizer(rec, &counts, frames)?;
            for &i in &rec.selected {
                counts[i] += 1;
            }
            ensure(rec.t_k == counts, || {
                format!("{mode:?} t={} n={}: t_k {:?} vs {counts:?}", rec.t, rec.n, rec.t_k)
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "R(0)=1, R(T)=e^-1; {checked} trace records consistent in both modes"
    ))
}

fn check_regularizer(rec: &TraceRecord, before: &[u32], frames: usize) -> Result<(), String> {
    for (k, (&r, &c)) in rec.regularizer.iter().zip(before).enumerate() {
        let expect = (-(c as f64) / frames as f64).exp();
        ensure((r - expect).abs() <= 1e-9, || {
            format!("t={} n={} frame {k}: R {r} vs {expect}", rec.t, rec.n)
        })?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = random_scene_spec(&suite_params(4, 1), 9).map_err(|e| e.to_string())?;
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).map_err(|e| e.to_string())?;
    let manifest = cmd_generate(&spec_path, 9, &dir.path().join("scene")).map_err(|e| e.to_string())?;
    let manifest_path = dir.path().join("scene/manifest.json");
    let config = PipelineConfig {
        policy: Policy::Random,
        ..small_config()
    };
    for run in ["a", "b"] {
        cmd_run(&manifest_path, &config, &dir.path().join(run)).map_err(|e| e.to_string())?;
    }
    let mut files: Vec<String> = (0..manifest.frames.len()).map(disparity_file).collect();
    files.push("trace.jsonl".into());
    for f in &files {
        let a = fs::read(dir.path().join("a").join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(dir.path().join("b").join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{f} differs"))?;
    }
    Ok(format!("{} files byte-identical across two runs", files.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("equation fidelity", equation_fidelity),
        ("loss weights", loss_weights),
        ("alpha identity", alpha_identity),
        ("buffer size and read-out speed", buffer_and_efficiency),
        ("confidence head gradients", gradient_check),
        ("metric oracles", metric_oracles),
        ("corruption avoidance", corruption_avoidance),
        ("counter and regularizer laws", counter_laws),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
