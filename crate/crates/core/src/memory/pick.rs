use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};

use super::{DynamicMemory, SelectionCounters, VanillaMemory};

/// Indices of the `k` largest scores, ties going to the lower index,
/// returned in ascending order. All indices when `k >= scores.len()`.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// The `k` frames closest before (and including) `target`, topped up with the
/// frames after it when fewer than `k` precede it.
pub fn latest_indices(len: usize, target: usize, k: usize) -> Vec<usize> {
    let k = k.min(len);
    let end = (target + 1).min(len);
    let start = end.saturating_sub(k);
    let mut picked: Vec<usize> = (start..end).collect();
    picked.extend((end..len).take(k - picked.len()));
    picked
}

/// A uniformly random `k`-subset of `0..len`, ascending.
pub fn random_indices(len: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let k = k.min(len);
    let mut all: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = rng.random_range(i..len);
        all.swap(i, j);
    }
    let mut picked = all[..k].to_vec();
    picked.sort_unstable();
    picked
}

/// Keeps the top-`k` frames by `scores` and increments their counters.
pub fn pick_topk(
    memory: &VanillaMemory,
    scores: &[f64],
    k: usize,
    counters: &mut SelectionCounters,
) -> Result<DynamicMemory> {
    if memory.is_empty() {
        return Err(Error::EmptyMemory);
    }
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if scores.len() != memory.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} memory frames",
            scores.len(),
            memory.len()
        )));
    }
    gather(memory, top_k_indices(scores, k), counters)
}

/// Builds the dynamic memory for an explicit ascending index set and records
/// the selection in `counters`.
pub fn gather(memory: &VanillaMemory, indices: Vec<usize>, counters: &mut SelectionCounters) -> Result<DynamicMemory> {
    if memory.is_empty() {
        return Err(Error::EmptyMemory);
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= memory.len()) {
        return Err(Error::Shape(format!(
            "frame {bad} is outside a {}-frame memory",
            memory.len()
        )));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Shape("selected indices must be strictly ascending".into()));
    }
    for &i in &indices {
        counters.increment(i)?;
    }
    Ok(DynamicMemory {
        keys: indices.iter().map(|&i| memory.keys()[i].clone()).collect(),
        values: indices.iter().map(|&i| memory.values()[i].clone()).collect(),
        indices,
        weights: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Full-sort oracle: rank by (score desc, index asc), keep k.
    fn oracle(scores: &[f64], k: usize) -> Vec<usize> {
        let mut v: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
        v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut out: Vec<usize> = v.into_iter().take(k).map(|p| p.1).collect();
        out.sort();
        out
    }

    #[test]
    fn worked_example() {
        let s = [0.9, 0.1, 0.5, 0.7, 0.3];
        // 1-based {1, 3, 4}
        assert_eq!(top_k_indices(&s, 3), vec![0, 2, 3]);
        assert_eq!(top_k_indices(&s, 3), oracle(&s, 3));
        assert_eq!(top_k_indices(&[0.4; 5], 2), vec![0, 1]);
        assert_eq!(top_k_indices(&s, 9), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn latest_window() {
        assert_eq!(latest_indices(20, 10, 5), vec![6, 7, 8, 9, 10]);
        assert_eq!(latest_indices(20, 1, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(latest_indices(3, 0, 5), vec![0, 1, 2]);
        assert_eq!(latest_indices(20, 19, 5), vec![15, 16, 17, 18, 19]);
    }

    #[test]
    fn random_subset_is_reproducible() {
        let a = random_indices(20, 5, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        let b = random_indices(20, 5, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    proptest::proptest! {
        #[test]
        fn matches_sort_oracle(raw in proptest::collection::vec(0u8..6, 1..12), k in 1usize..14) {
            // small integer scores force plenty of ties
            let scores: Vec<f64> = raw.iter().map(|&v| v as f64 / 2.0).collect();
            proptest::prop_assert_eq!(top_k_indices(&scores, k), oracle(&scores, k));
        }

        #[test]
        fn permutation_consistent(raw in proptest::collection::vec(-100i32..100, 2..10), k in 1usize..10, seed in 0u64..1000) {
            // distinct scores so tie-break does not interfere
            let mut scores: Vec<f64> = raw.iter().enumerate().map(|(i, &v)| v as f64 + i as f64 * 1e-3).collect();
            scores.dedup();
            let n = scores.len();
            let perm = random_indices(n, n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut shuffled: Vec<usize> = perm.clone();
            // a real permutation, not the sorted identity
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1);
            for i in (1..n).rev() { let j = rng.random_range(0..=i); shuffled.swap(i, j); }
            let permuted: Vec<f64> = shuffled.iter().map(|&i| scores[i]).collect();
            let a: Vec<usize> = top_k_indices(&scores, k);
            let mut b: Vec<usize> = top_k_indices(&permuted, k).into_iter().map(|j| shuffled[j]).collect();
            b.sort();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
