use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::cosine_similarity;

/// `1 - cos(x, y)`, in [0, 2].
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(x, y)?)
}

/// 1:1 nearest-neighbour matches with replacement. `pairs[i]` is
/// `(treated index, control index)` into the slices passed to the matcher;
/// there is exactly one pair per treated unit, in treated order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub method: String,
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<f64>,
}

impl MatchResult {
    /// Matched control index for each treated unit.
    pub fn controls(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|&(_, c)| c)
    }
}

/// Matches every treated unit to the control minimizing `distance`; ties
/// go to the lowest control index.
pub fn nearest_neighbor<T, C, F>(treated: &[T], controls: &[C], method: &str, distance: F) -> Result<MatchResult>
where
    T: Sync,
    C: Sync,
    F: Fn(&T, &C) -> Result<f64> + Sync,
{
    if controls.is_empty() {
        return Err(Error::EmptyGroup("cannot match against an empty control group".into()));
    }
    let best: Vec<(usize, f64)> = treated
        .par_iter()
        .map(|t| {
            let mut best = (0usize, f64::INFINITY);
            for (j, c) in controls.iter().enumerate() {
                let d = distance(t, c)?;
                if d < best.1 {
                    best = (j, d);
                }
            }
            if !best.1.is_finite() {
                return Err(Error::InvalidInput("non-finite matching distance".into()));
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(MatchResult {
        method: method.to_owned(),
        pairs: best.iter().enumerate().map(|(i, &(j, _))| (i, j)).collect(),
        distances: best.iter().map(|&(_, d)| d).collect(),
    })
}

/// Covariate matching on cosine distance.
pub fn nnm_match<V: AsRef<[f64]> + Sync>(treated: &[V], controls: &[V]) -> Result<MatchResult> {
    nearest_neighbor(treated, controls, "NNM", |t, c| cosine_distance(t.as_ref(), c.as_ref()))
}

/// Propensity-score matching on squared score difference.
pub fn psm_match(treated_scores: &[f64], control_scores: &[f64], method: &str) -> Result<MatchResult> {
    nearest_neighbor(treated_scores, control_scores, method, |a, b| Ok((a - b) * (a - b)))
}
