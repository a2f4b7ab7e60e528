//! Play: adaptive weighting of the picked frames and positional modulation.

use crate::error::{Error, Result};
use crate::grid::TokenGrid;

use super::DynamicMemory;

/// Lower bound applied to each selected score before normalization.
pub const SCORE_FLOOR: f64 = 1e-6;

/// `S̄[i] = max(S[i], ε) / Σ_{j ∈ I} max(S[j], ε)` over the selected frames.
pub fn play_weights(scores: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= scores.len()) {
        return Err(Error::Shape(format!("selected frame {bad} has no score")));
    }
    let guarded: Vec<f64> = indices.iter().map(|&i| scores[i].max(SCORE_FLOOR)).collect();
    let total: f64 = guarded.iter().sum();
    Ok(guarded.into_iter().map(|s| s / total).collect())
}

/// Fixed sinusoidal encodings, one `C`-vector per frame of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalTable {
    rows: Vec<Vec<f64>>,
}

impl PositionalTable {
    /// Frame index `i` (0-based) is encoded at position `p = i + 1`:
    /// `sin(p / 10000^(2j/C))` in channel `2j`, the matching cosine in `2j + 1`.
    pub fn sinusoidal(frames: usize, channels: usize) -> Self {
        let rows = (0..frames)
            .map(|pos| {
                (0..channels)
                    .map(|c| {
                        let pair = (c / 2) as f64;
                        let angle = (pos + 1) as f64 / 10000f64.powf(2.0 * pair / channels as f64);
                        if c % 2 == 0 {
                            angle.sin()
                        } else {
                            angle.cos()
                        }
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn zeros(frames: usize, channels: usize) -> Self {
        Self {
            rows: vec![vec![0.0; channels]; frames],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, frame: usize) -> Result<&[f64]> {
        self.rows.get(frame).map(Vec::as_slice).ok_or_else(|| {
            Error::Shape(format!(
                "no positional encoding for frame {frame} (table has {})",
                self.rows.len()
            ))
        })
    }
}

/// `q̃ = q + P_t` and `k̃_i = S̄[i] · k_i + P_i` for every picked frame `i`.
/// Requires the dynamic memory's weights to be set.
pub fn modulate(
    query: &TokenGrid,
    target: usize,
    dynamic: &DynamicMemory,
    table: &PositionalTable,
) -> Result<(TokenGrid, Vec<TokenGrid>)> {
    let weights = dynamic
        .weights
        .as_ref()
        .ok_or_else(|| Error::Config("play weights must be computed before modulation".into()))?;
    let mut q = query.clone();
    q.add_to_tokens(table.row(target)?)?;
    let keys = dynamic
        .indices
        .iter()
        .zip(&dynamic.keys)
        .zip(weights)
        .map(|((&i, k), &w)| {
            let mut out = k.scaled(w);
            out.add_to_tokens(table.row(i)?)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((q, keys))
}
