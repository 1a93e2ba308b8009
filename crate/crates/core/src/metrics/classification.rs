use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clip applied to probabilities inside logarithms.
pub const PROB_CLIP: f64 = 1e-15;

/// `counts[t][p]` = rows with true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize, y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::DimensionMismatch {
                expected: y_true.len(),
                found: y_pred.len(),
            });
        }
        let mut counts = vec![vec![0; k]; k];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= k || p >= k {
                return Err(Error::InvalidInput(format!("label out of range for {k} classes")));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// F1 for class `c`; `None` when the class is neither present nor
    /// predicted.
    pub fn f1(&self, c: usize) -> Option<f64> {
        let tp = self.counts[c][c];
        let actual: usize = self.counts[c].iter().sum();
        let predicted: usize = self.counts.iter().map(|row| row[c]).sum();
        if actual + predicted == 0 {
            return None;
        }
        Some(2.0 * tp as f64 / (actual + predicted) as f64)
    }
}

/// Unweighted mean of per-class F1 over classes that occur in either the
/// truth or the predictions.
pub fn macro_f1(k: usize, y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let cm = ConfusionMatrix::new(k, y_true, y_pred)?;
    let f1s: Vec<f64> = (0..k).filter_map(|c| cm.f1(c)).collect();
    if f1s.is_empty() {
        return Err(Error::InvalidInput("no rows to score".into()));
    }
    Ok(f1s.iter().sum::<f64>() / f1s.len() as f64)
}

/// Area under the ROC curve (Mann-Whitney form, ties count one half).
/// `None` when one of the two classes is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 || scores.len() != labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&r| labels[r]).count() as f64 * mid;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean negative log probability of the true class, clipped at
/// [`PROB_CLIP`].
pub fn cross_entropy(y_true: &[usize], y_prob: &[Vec<f64>]) -> Result<f64> {
    if y_true.len() != y_prob.len() || y_true.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_prob.len(),
        });
    }
    let mut total = 0.0;
    for (&t, p) in y_true.iter().zip(y_prob) {
        let v = *p
            .get(t)
            .ok_or_else(|| Error::InvalidInput(format!("label {t} outside probability vector")))?;
        total -= v.clamp(PROB_CLIP, 1.0).ln();
    }
    Ok(total / y_true.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEval {
    pub macro_f1: f64,
    /// Prevalence-weighted one-vs-rest AUC.
    pub weighted_auc: f64,
    /// AUC over the flattened one-hot indicators.
    pub micro_auc: f64,
    pub cross_entropy: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate_classifier(y_true: &[usize], y_prob: &[Vec<f64>]) -> Result<ClassifierEval> {
    if y_true.len() != y_prob.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_prob.len(),
        });
    }
    let k = y_prob.first().map_or(0, Vec::len);
    if y_prob.iter().any(|p| p.len() != k) {
        return Err(Error::InvalidInput("ragged probability rows".into()));
    }
    if y_prob.iter().flatten().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::InvalidInput("probabilities must lie in [0, 1]".into()));
    }
    let distinct: std::collections::BTreeSet<usize> = y_true.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Degenerate("need at least two classes in y_true".into()));
    }
    let y_pred: Vec<usize> = y_prob
        .iter()
        .map(|p| (0..k).fold(0, |best, c| if p[c] > p[best] { c } else { best }))
        .collect();
    let confusion = ConfusionMatrix::new(k, y_true, &y_pred)?;
    let macro_f1 = macro_f1(k, y_true, &y_pred)?;

    let m = y_true.len() as f64;
    let (mut weighted, mut weight_sum) = (0.0, 0.0);
    for c in 0..k {
        let labels: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
        let scores: Vec<f64> = y_prob.iter().map(|p| p[c]).collect();
        match roc_auc(&scores, &labels) {
            Some(auc) => {
                let prevalence = labels.iter().filter(|&&l| l).count() as f64 / m;
                weighted += prevalence * auc;
                weight_sum += prevalence;
            }
            None => tracing::warn!(class = c, "class absent from y_true; skipped in AUC"),
        }
    }
    let weighted_auc = weighted / weight_sum;

    let flat_scores: Vec<f64> = y_prob.iter().flatten().copied().collect();
    let flat_labels: Vec<bool> = y_true
        .iter()
        .flat_map(|&t| (0..k).map(move |c| c == t))
        .collect();
    let micro_auc = roc_auc(&flat_scores, &flat_labels).expect("both indicator values occur");

    Ok(ClassifierEval {
        macro_f1,
        weighted_auc,
        micro_auc,
        cross_entropy: cross_entropy(y_true, y_prob)?,
        confusion,
    })
}
