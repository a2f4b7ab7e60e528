//! Frame scoring for the quality assessment step.

use crate::error::Result;
use crate::features::pooled_phi;
use crate::grid::TokenGrid;

use super::VanillaMemory;

/// `sim[i] = ⟨φ(q), φ(k_i)⟩`. Frames whose pooled descriptor is all zero
/// (on either side) score 0.
pub fn similarity_score(query: &TokenGrid, memory: &VanillaMemory, pool_factor: usize) -> Result<Vec<f64>> {
    memory.check_query(query)?;
    let q = pooled_phi(query, pool_factor)?;
    memory
        .keys()
        .iter()
        .map(|k| Ok(q.dot(&pooled_phi(k, pool_factor)?).clamp(-1.0, 1.0)))
        .collect()
}

/// `R[k] = exp(-t_k / T)`.
pub fn redundancy_regularizer(counters: &[u32], sequence_len: usize) -> Vec<f64> {
    let t = sequence_len.max(1) as f64;
    counters.iter().map(|&c| (-(c as f64) / t).exp()).collect()
}

/// `S^r = R · sim`, elementwise.
pub fn relevance_score(similarity: &[f64], regularizer: &[f64]) -> Vec<f64> {
    similarity.iter().zip(regularizer).map(|(s, r)| s * r).collect()
}

/// `S = S^c + S^r`, elementwise.
pub fn quality_scores(confidence: &[f64], relevance: &[f64]) -> Vec<f64> {
    confidence.iter().zip(relevance).map(|(c, r)| c + r).collect()
}
