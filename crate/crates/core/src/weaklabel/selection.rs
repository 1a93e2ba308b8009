use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::cosine_similarity;

/// Rows chosen for discriminative training, with hard labels
/// (1 = Personal) and confidence weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Uniformly samples up to `k` rows whose confidence `max(p, 1 - p)`
/// exceeds `threshold`. Indices are returned in ascending order.
pub fn select_weighted_training(probs: &[f64], threshold: f64, k: usize, seed: u64) -> Result<WeightedSample> {
    let eligible: Vec<usize> = (0..probs.len())
        .filter(|&i| probs[i].max(1.0 - probs[i]) > threshold)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Degenerate(format!(
            "no weak label has confidence above {threshold}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = k.min(eligible.len());
    let mut indices: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), take)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    indices.sort_unstable();
    let labels = indices.iter().map(|&i| (probs[i] >= 0.5) as usize).collect();
    let weights = indices.iter().map(|&i| probs[i].max(1.0 - probs[i])).collect();
    Ok(WeightedSample {
        indices,
        labels,
        weights,
    })
}

/// Indices of the `k` source rows with the highest maximum cosine
/// similarity to any target row, most similar first (ties: lower index).
pub fn domain_select(source: &[Vec<f64>], target: &[Vec<f64>], k: usize) -> Result<Vec<usize>> {
    if target.is_empty() {
        return Err(Error::InvalidInput("no target instances".into()));
    }
    let mut scored = Vec::with_capacity(source.len());
    for (i, s) in source.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for t in target {
            best = best.max(cosine_similarity(s, t)?);
        }
        scored.push((best, i));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    if k > source.len() {
        tracing::warn!(k, available = source.len(), "domain selection size clamped");
    }
    Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
}
