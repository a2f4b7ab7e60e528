use std::borrow::Cow;

use log::debug;

use crate::confidence::{confidence_loss, gt_confidence, proxy_confidence, ConfidenceHead};
use crate::config::{ConfidenceSource, PipelineConfig, Policy};
use crate::costvolume::{build_correlation, encode_cost, lookup, winner_take_all, CorrelationVolume};
use crate::error::{Error, Result, ResultExt};
use crate::features::{box_downsample, encode_context, project_qk, FeatureExtractor, ProjectionWeights, Scale};
use crate::grid::TokenGrid;
use crate::memory::{
    qam_step, read_out, CounterMode, MemoryMode, PositionalTable, QamParams, Selection, SelectionCounters,
    VanillaMemory,
};
use crate::raster::FloatRaster;
use crate::seed::{derive_seed, rng_for, tags};
use crate::trace::TraceRecord;
use crate::video::{StereoFrame, StereoVideoSequence};

use super::gru::GruCell;
use super::loss::{disparity_loss, total_loss};
use super::upsample_disparity;

/// Everything computed once per frame before refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEncoding {
    pub context: TokenGrid,
    pub query: TokenGrid,
    pub key: TokenGrid,
    pub volume: CorrelationVolume,
    pub cost: TokenGrid,
    pub value: TokenGrid,
}

/// Seeded features and projections for one input resolution.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub extractor: FeatureExtractor,
    pub weights: ProjectionWeights,
    pub scale: Scale,
    pub max_disparity: usize,
}

impl Encoder {
    pub fn new(config: &PipelineConfig, width: usize) -> Result<Self> {
        let scale = config.scale()?;
        let grid_width = scale.extent(width);
        let max_disparity = config.max_disparity.unwrap_or((grid_width / 2).max(1));
        if max_disparity > grid_width {
            return Err(Error::Config(format!(
                "max_disparity {max_disparity} exceeds the working grid width {grid_width}"
            )));
        }
        Ok(Self {
            extractor: FeatureExtractor::new(config.channels, config.seed)?,
            weights: ProjectionWeights::seeded(config.seed, config.channels, max_disparity),
            scale,
            max_disparity,
        })
    }

    pub fn encode(&self, frame: &StereoFrame) -> Result<FrameEncoding> {
        let left = self.extractor.build_pyramid(&frame.left)?;
        let right = self.extractor.build_pyramid(&frame.right)?;
        let context = encode_context(&left, &self.weights.context)?.into_level(self.scale);
        let (query, key) = project_qk(&context, &self.weights)?;
        let volume = build_correlation(left.get(self.scale), right.get(self.scale), self.max_disparity)?;
        let cf = encode_cost(&volume, &self.weights.cost, &self.weights.value)?;
        Ok(FrameEncoding {
            context,
            query,
            key,
            volume,
            cost: cf.cost,
            value: cf.value,
        })
    }
}

/// Produces confidence maps at the working scale.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfidenceModel {
    Proxy { sigma_p: f64 },
    Head(ConfidenceHead),
}

impl ConfidenceModel {
    pub fn from_config(config: &PipelineConfig) -> Result<Self> {
        match config.confidence {
            ConfidenceSource::Proxy => Ok(ConfidenceModel::Proxy {
                sigma_p: config.sigma_p,
            }),
            ConfidenceSource::Head => {
                let path = config
                    .head_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("confidence \"head\" requires head_path".into()))?;
                let head = ConfidenceHead::load(path)?;
                if head.channels() != config.channels {
                    return Err(Error::Config(format!(
                        "confidence head expects {} channels, pipeline uses {}",
                        head.channels(),
                        config.channels
                    )));
                }
                Ok(ConfidenceModel::Head(head))
            }
        }
    }

    /// Confidence map `u` for a frame whose current working-scale disparity
    /// is `disparity`.
    pub fn map(
        &self,
        frame: &StereoFrame,
        encoding: &FrameEncoding,
        disparity: &TokenGrid,
        scale: Scale,
    ) -> Result<TokenGrid> {
        match self {
            ConfidenceModel::Proxy { sigma_p } => {
                let (w, h) = (frame.left.width(), frame.left.height());
                let full = upsample_disparity(disparity, scale, w, h);
                let u = proxy_confidence(&full, &frame.left, &frame.right, *sigma_p)?;
                Ok(box_downsample(&u, scale))
            }
            ConfidenceModel::Head(head) => head.forward(&encoding.value),
        }
    }
}

/// `L_d`, `L_conf` and their sum for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub disparity: f64,
    pub confidence: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub scale: Scale,
    /// Final full-resolution disparity per frame.
    pub disparities: Vec<FloatRaster>,
    /// `iterations[t][n]` is the working-scale disparity after update `n + 1`.
    pub iterations: Vec<Vec<TokenGrid>>,
    /// `deltas[t][n]` is the residual added in update `n + 1`.
    pub deltas: Vec<Vec<TokenGrid>>,
    /// Frame-level confidence `S^c` of every memory frame.
    pub frame_confidence: Vec<f64>,
    pub traces: Vec<TraceRecord>,
    /// Present when the sequence has ground truth.
    pub losses: Option<Losses>,
}

/// Runs the full pipeline over a sequence with the confidence source named
/// in `config`.
pub fn run_sequence(video: &StereoVideoSequence, config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let model = ConfidenceModel::from_config(config)?;
    run_sequence_with(video, config, &model)
}

/// Runs the full pipeline with an explicit confidence model.
pub fn run_sequence_with(
    video: &StereoVideoSequence,
    config: &PipelineConfig,
    model: &ConfidenceModel,
) -> Result<RunOutput> {
    config.validate()?;
    let video: Cow<'_, StereoVideoSequence> = match config.frames {
        Some(t) if t < video.len() => Cow::Owned(video.truncated(t)?),
        _ => Cow::Borrowed(video),
    };
    let t_len = video.len();
    let (width, height) = (video.width(), video.height());
    let encoder = Encoder::new(config, width)?;
    let scale = encoder.scale;

    let encodings = video
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| encoder.encode(f).context_with(|| format!("encoding frame {t}")))
        .collect::<Result<Vec<_>>>()?;

    let frame_confidence = video
        .frames()
        .iter()
        .zip(&encodings)
        .enumerate()
        .map(|(t, (frame, enc))| {
            let initial = winner_take_all(&enc.volume);
            let u = model
                .map(frame, enc, &initial, scale)
                .context_with(|| format!("confidence of frame {t}"))?;
            Ok(u.mean())
        })
        .collect::<Result<Vec<f64>>>()?;

    let memory = VanillaMemory::new(
        encodings.iter().map(|e| e.key.clone()).collect(),
        encodings.iter().map(|e| e.value.clone()).collect(),
    )?;
    let table = if config.positional_encoding {
        PositionalTable::sinusoidal(t_len, config.channels)
    } else {
        PositionalTable::zeros(t_len, config.channels)
    };
    let lookup_channels = 2 * config.radius + 1;
    let cell = GruCell::seeded(lookup_channels + 2 * config.channels, config.hidden, config.seed);
    let params = QamParams {
        k: config.k,
        pool_factor: config.pool_factor,
        sequence_len: t_len,
        play: config.policy.play(),
    };
    let random_seed = derive_seed(config.seed, tags::RANDOM_POLICY);

    let mut counters = SelectionCounters::new(t_len);
    let mut traces = Vec::new();
    let mut iterations = Vec::with_capacity(t_len);
    let mut deltas = Vec::with_capacity(t_len);
    let mut disparities = Vec::with_capacity(t_len);

    for (t, enc) in encodings.iter().enumerate() {
        if config.counter_mode == CounterMode::Reset {
            counters.reset();
        }
        let frame_memory: Cow<'_, VanillaMemory> = match config.memory_mode {
            MemoryMode::Offline => Cow::Borrowed(&memory),
            MemoryMode::Causal => Cow::Owned(memory.prefix(t + 1)?),
        };
        let (sh, sw) = (enc.cost.height(), enc.cost.width());
        let mut hidden = TokenGrid::zeros(sh, sw, config.hidden);
        let mut d = TokenGrid::zeros(sh, sw, 1);
        let mut frame_iters = Vec::with_capacity(config.iterations);
        let mut frame_deltas = Vec::with_capacity(config.iterations);
        for n in 0..config.iterations {
            let mut step = || -> Result<(TokenGrid, TokenGrid, Option<TraceRecord>)> {
                let (aggregated, record) = if config.memory {
                    let mut rng = rng_for(random_seed, ((t as u64) << 32) | n as u64);
                    let selection = match config.policy {
                        Policy::Full => Selection::All,
                        Policy::Latest | Policy::PlayOnly => Selection::Latest,
                        Policy::Random => Selection::Random(&mut rng),
                        Policy::Ppm | Policy::PickOnly => Selection::TopK,
                    };
                    let confidence = &frame_confidence[..frame_memory.len()];
                    let out = qam_step(
                        &enc.query,
                        t,
                        &frame_memory,
                        &mut counters,
                        confidence,
                        &params,
                        selection,
                        &table,
                    )?;
                    let agg = read_out(&out.query, &out.keys, &out.dynamic.values, &enc.cost, config.alpha)?;
                    let weights = out.dynamic.weights.clone().unwrap_or_default();
                    (
                        agg,
                        Some(TraceRecord::new(t, n, out.quality, out.dynamic.indices, weights)),
                    )
                } else {
                    (enc.cost.clone(), None)
                };
                let corr = lookup(&enc.volume, &d, config.radius)?;
                let input = TokenGrid::concat(&[&corr, &aggregated, &enc.context])?;
                let (next, delta) = cell.step(&hidden, &input)?;
                Ok((next, delta, record))
            };
            let (next, delta, record) = step().context_with(|| format!("frame {t}, iteration {n}"))?;
            hidden = next;
            d.data_mut().iter_mut().zip(delta.data()).for_each(|(a, b)| *a += b);
            d.ensure_finite("disparity")
                .context_with(|| format!("frame {t}, iteration {n}"))?;
            traces.extend(record);
            frame_iters.push(d.clone());
            frame_deltas.push(delta);
        }
        debug!("frame {t}: mean disparity {:.3}", d.mean() * scale.factor() as f64);
        disparities.push(upsample_disparity(&d, scale, width, height));
        iterations.push(frame_iters);
        deltas.push(frame_deltas);
    }

    let losses = match video.gt_disparity() {
        Some(gt) => Some(sequence_losses(
            &video,
            gt,
            &encodings,
            &iterations,
            model,
            config,
            scale,
        )?),
        None => None,
    };

    Ok(RunOutput {
        scale,
        disparities,
        iterations,
        deltas,
        frame_confidence,
        traces,
        losses,
    })
}

fn sequence_losses(
    video: &StereoVideoSequence,
    gt: &[FloatRaster],
    encodings: &[FrameEncoding],
    iterations: &[Vec<TokenGrid>],
    model: &ConfidenceModel,
    config: &PipelineConfig,
    scale: Scale,
) -> Result<Losses> {
    let (w, h) = (video.width(), video.height());
    let f = scale.factor() as f64;
    let full: Vec<Vec<FloatRaster>> = iterations
        .iter()
        .map(|iters| iters.iter().map(|d| upsample_disparity(d, scale, w, h)).collect())
        .collect();
    let disparity = disparity_loss(&full, Some(gt), config.gamma)?;
    let mut maps = Vec::with_capacity(iterations.len());
    let mut targets = Vec::with_capacity(iterations.len());
    for (t, iters) in iterations.iter().enumerate() {
        let truth = box_downsample(&gt[t], scale);
        let frame = &video.frames()[t];
        let mut u = Vec::with_capacity(iters.len());
        let mut uh = Vec::with_capacity(iters.len());
        for d in iters {
            u.push(model.map(frame, &encodings[t], d, scale)?);
            uh.push(gt_confidence(&d.scaled(f), &truth, config.sigma)?);
        }
        maps.push(u);
        targets.push(uh);
    }
    let confidence = confidence_loss(&maps, &targets, config.gamma)?;
    Ok(Losses {
        disparity,
        confidence,
        total: total_loss(disparity, confidence),
    })
}
