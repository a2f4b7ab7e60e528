//! Pick-and-play memory.
//!
//! The vanilla memory holds key and value grids for every frame of the
//! sequence. For each refinement iteration of a target frame the quality
//! assessment step scores every stored frame, keeps the top `K` (pick),
//! reweights and position-encodes them (play), and the read-out attends from
//! the target's query over the picked tokens.

mod pick;
mod play;
mod readout;
mod score;

pub use pick::{gather, latest_indices, pick_topk, random_indices, top_k_indices};
pub use play::{modulate, play_weights, PositionalTable, SCORE_FLOOR};
pub use readout::{attend, read_out, softmax_in_place};
pub use score::{quality_scores, redundancy_regularizer, relevance_score, similarity_score};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TokenGrid;

pub const DEFAULT_K: usize = 5;

/// Keys and values of every frame, in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaMemory {
    keys: Vec<TokenGrid>,
    values: Vec<TokenGrid>,
}

impl VanillaMemory {
    pub fn new(keys: Vec<TokenGrid>, values: Vec<TokenGrid>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::EmptyMemory);
        }
        if keys.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} key grids but {} value grids",
                keys.len(),
                values.len()
            )));
        }
        let ks = keys[0].shape();
        let vs = values[0].shape();
        if keys.iter().any(|k| k.shape() != ks) || values.iter().any(|v| v.shape() != vs) {
            return Err(Error::Shape("memory grids must share one shape".into()));
        }
        if ks.0 != vs.0 || ks.1 != vs.1 {
            return Err(Error::Shape("keys and values must share a token layout".into()));
        }
        Ok(Self { keys, values })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[TokenGrid] {
        &self.keys
    }

    pub fn values(&self) -> &[TokenGrid] {
        &self.values
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.keys[0].tokens()
    }

    /// `L = T · sH · sW`.
    pub fn total_tokens(&self) -> usize {
        self.len() * self.tokens_per_frame()
    }

    /// The first `n` frames, used by causal runs.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(self.keys[..n].to_vec(), self.values[..n].to_vec())
    }

    fn check_query(&self, query: &TokenGrid) -> Result<()> {
        let k = &self.keys[0];
        if query.shape() != k.shape() {
            return Err(Error::Shape(format!(
                "query {:?} does not match memory keys {:?}",
                query.shape(),
                k.shape()
            )));
        }
        Ok(())
    }
}

/// The picked subset: ascending frame indices with their keys, values and
/// (once computed) play weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicMemory {
    pub indices: Vec<usize>,
    pub keys: Vec<TokenGrid>,
    pub values: Vec<TokenGrid>,
    pub weights: Option<Vec<f64>>,
}

impl DynamicMemory {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `L' = K · sH · sW`.
    pub fn token_count(&self) -> usize {
        self.keys.iter().map(TokenGrid::tokens).sum()
    }
}

/// How often each frame has been picked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionCounters(Vec<u32>);

impl SelectionCounters {
    pub fn new(frames: usize) -> Self {
        Self(vec![0; frames])
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, frame: usize) -> u32 {
        self.0[frame]
    }

    pub fn increment(&mut self, frame: usize) -> Result<()> {
        let slot = self
            .0
            .get_mut(frame)
            .ok_or_else(|| Error::Shape(format!("no counter for frame {frame}")))?;
        *slot += 1;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.0.iter_mut().for_each(|c| *c = 0);
    }
}

/// Whether selection counters restart for every target frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterMode {
    #[default]
    Reset,
    Persist,
}

/// Which frames the memory may hold for target frame `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    /// All frames of the sequence.
    #[default]
    Offline,
    /// Frames `0..=t` only.
    Causal,
}

/// Per-frame scores from one quality-assessment step. Vectors are indexed
/// by memory frame; `counters` is the state after the pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityState {
    pub confidence: Vec<f64>,
    pub similarity: Vec<f64>,
    pub regularizer: Vec<f64>,
    pub relevance: Vec<f64>,
    pub total: Vec<f64>,
    pub counters: Vec<u32>,
}

/// The frame-selection rule applied to the quality scores.
pub enum Selection<'a> {
    /// Top-`K` by quality score.
    TopK,
    /// The `K` frames nearest before the target.
    Latest,
    /// Uniform `K`-subset.
    Random(&'a mut ChaCha8Rng),
    /// Every frame in memory.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QamParams {
    pub k: usize,
    pub pool_factor: usize,
    /// Sequence length `T` used by the regularizer.
    pub sequence_len: usize,
    /// Apply play weights and positional encodings; off reads out raw keys.
    pub play: bool,
}

/// Output of one pick-and-play step.
#[derive(Debug, Clone, PartialEq)]
pub struct QamOutput {
    pub quality: QualityState,
    pub dynamic: DynamicMemory,
    /// Query after modulation.
    pub query: TokenGrid,
    /// Picked keys after modulation.
    pub keys: Vec<TokenGrid>,
}

/// Scores the memory for `target`, picks frames, computes play weights and
/// modulates query and keys.
///
/// `confidence` holds the frame-level confidence score `S^c` of every memory
/// frame (the spatial mean of its confidence map).
#[allow(clippy::too_many_arguments)]
pub fn qam_step(
    query: &TokenGrid,
    target: usize,
    memory: &VanillaMemory,
    counters: &mut SelectionCounters,
    confidence: &[f64],
    params: &QamParams,
    selection: Selection<'_>,
    table: &PositionalTable,
) -> Result<QamOutput> {
    if confidence.len() != memory.len() {
        return Err(Error::Shape(format!(
            "{} confidence scores for {} memory frames",
            confidence.len(),
            memory.len()
        )));
    }
    if params.k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let similarity = similarity_score(query, memory, params.pool_factor)?;
    let regularizer = redundancy_regularizer(&counters.as_slice()[..memory.len()], params.sequence_len);
    let relevance = relevance_score(&similarity, &regularizer);
    let total = quality_scores(confidence, &relevance);
    if let Some(i) = total.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("quality score of frame {i}")));
    }
    let n = memory.len();
    let mut dynamic = match selection {
        Selection::TopK => pick_topk(memory, &total, params.k, counters)?,
        Selection::Latest => gather(memory, latest_indices(n, target, params.k), counters)?,
        Selection::Random(rng) => gather(memory, random_indices(n, params.k, rng), counters)?,
        Selection::All => gather(memory, (0..n).collect(), counters)?,
    };
    dynamic.weights = Some(play_weights(&total, &dynamic.indices)?);
    let (query, keys) = if params.play {
        modulate(query, target, &dynamic, table)?
    } else {
        (query.clone(), dynamic.keys.clone())
    };
    Ok(QamOutput {
        quality: QualityState {
            confidence: confidence.to_vec(),
            similarity,
            regularizer,
            relevance,
            total,
            counters: counters.as_slice()[..n].to_vec(),
        },
        dynamic,
        query,
        keys,
    })
}
