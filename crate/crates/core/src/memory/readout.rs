//! Attention read-out over the dynamic memory.

use crate::error::{Error, Result};
use crate::grid::{dot, TokenGrid};

/// In-place numerically stable softmax (max subtraction).
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    logits.iter_mut().for_each(|v| *v /= total);
}

fn check_memory(query: &TokenGrid, keys: &[TokenGrid], values: &[TokenGrid]) -> Result<()> {
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
    let vc = values[0].channels();
    for (k, v) in keys.iter().zip(values) {
        if k.channels() != query.channels() {
            return Err(Error::Shape(format!(
                "key has {} channels, query has {}",
                k.channels(),
                query.channels()
            )));
        }
        if v.channels() != vc || v.tokens() != k.tokens() {
            return Err(Error::Shape("value grids must match their keys".into()));
        }
    }
    Ok(())
}

/// `Softmax(q kᵀ / √D_k) v` for every query token, attending over all tokens
/// of all memory frames.
pub fn attend(query: &TokenGrid, keys: &[TokenGrid], values: &[TokenGrid]) -> Result<TokenGrid> {
    check_memory(query, keys, values)?;
    let dk = query.channels();
    let scale = 1.0 / (dk as f64).sqrt();
    let vc = values[0].channels();
    let total: usize = keys.iter().map(TokenGrid::tokens).sum();
    // flatten memory once so the inner loops run over contiguous slices
    let flat_keys: Vec<f64> = keys.iter().flat_map(|k| k.data().iter().copied()).collect();
    let flat_values: Vec<f64> = values.iter().flat_map(|v| v.data().iter().copied()).collect();
    let mut out = TokenGrid::zeros(query.height(), query.width(), vc);
    let mut logits = vec![0.0; total];
    for t in 0..query.tokens() {
        let q = query.token(t);
        for (l, k) in logits.iter_mut().zip(flat_keys.chunks_exact(dk)) {
            *l = scale * dot(q, k);
        }
        if let Some(bad) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("attention logit {bad} for query token {t}")));
        }
        softmax_in_place(&mut logits);
        let dst = out.token_mut(t);
        for (&a, v) in logits.iter().zip(flat_values.chunks_exact(vc)) {
            dst.iter_mut().zip(v).for_each(|(o, x)| *o += a * x);
        }
    }
    Ok(out)
}

/// `F_agg = F_cost + α · Softmax(q̃ k̃ᵀ / √D_k) v'`.
///
/// At `α = 0` the result is `F_cost` bit for bit.
pub fn read_out(
    query: &TokenGrid,
    keys: &[TokenGrid],
    values: &[TokenGrid],
    cost: &TokenGrid,
    alpha: f64,
) -> Result<TokenGrid> {
    let attended = attend(query, keys, values)?;
    if attended.shape() != cost.shape() {
        return Err(Error::Shape(format!(
            "read-out {:?} does not match cost feature {:?}",
            attended.shape(),
            cost.shape()
        )));
    }
    if alpha == 0.0 {
        return Ok(cost.clone());
    }
    let mut out = cost.clone();
    out.data_mut()
        .iter_mut()
        .zip(attended.data())
        .for_each(|(f, a)| *f += alpha * a);
    out.ensure_finite("aggregated cost")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn alpha_zero_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let q = TokenGrid::random(2, 2, 4, &mut rng);
        let k = vec![TokenGrid::random(2, 2, 4, &mut rng)];
        let v = vec![TokenGrid::random(2, 2, 3, &mut rng)];
        let mut cost = TokenGrid::random(2, 2, 3, &mut rng);
        cost.data_mut()[0] = -0.0;
        let out = read_out(&q, &k, &v, &cost, 0.0).unwrap();
        let bits = |g: &TokenGrid| g.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out), bits(&cost));
    }

    #[test]
    fn identical_keys_average_values() {
        let q = TokenGrid::filled(1, 1, 2, 0.7);
        let keys = vec![TokenGrid::filled(1, 2, 2, 0.3)];
        let values = vec![TokenGrid::new(1, 2, 2, vec![1.0, 2.0, 5.0, -4.0]).unwrap()];
        let cost = TokenGrid::new(1, 1, 2, vec![10.0, 20.0]).unwrap();
        let out = read_out(&q, &keys, &values, &cost, 1.0).unwrap();
        assert!((out.token(0)[0] - 13.0).abs() < 1e-12);
        assert!((out.token(0)[1] - 19.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_logits_are_reported() {
        let q = TokenGrid::filled(1, 1, 1, 1e308);
        let keys = vec![TokenGrid::filled(1, 1, 1, 1e308)];
        let values = vec![TokenGrid::zeros(1, 1, 1)];
        assert!(matches!(attend(&q, &keys, &values), Err(Error::NonFinite(_))));
        assert!(matches!(attend(&q, &[], &[]), Err(Error::EmptyMemory)));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut v = vec![1000.0, 999.0, -5.0, 0.0];
        softmax_in_place(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|x| x.is_finite()));
    }
}
