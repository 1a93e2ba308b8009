use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::classify::{fit_gbm, fit_logistic, ClassWeights, Classifier, GbmOptions, LogisticOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropensityKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "GBM")]
    Gbm,
}

impl PropensityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PropensityKind::Lr => "LR",
            PropensityKind::Gbm => "GBM",
        }
    }
}

/// Scores are kept strictly inside (0, 1).
const SCORE_EPS: f64 = 1e-12;

/// P(T = 1 | X) from a classifier fitted with balanced class weights.
/// Logistic regression uses balanced class weights directly; boosting
/// receives the same balancing through sample weights.
pub fn fit_propensity(
    x: ArrayView2<f64>,
    treated: &[bool],
    kind: PropensityKind,
    lr_c: f64,
    gbm: &GbmOptions,
) -> Result<Vec<f64>> {
    if x.nrows() != treated.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: treated.len(),
        });
    }
    let y: Vec<usize> = treated.iter().map(|&t| t as usize).collect();
    let n_t = y.iter().sum::<usize>();
    if n_t == 0 || n_t == y.len() {
        return Err(Error::Degenerate("propensity model needs treated and control units".into()));
    }
    let model: Box<dyn Classifier> = match kind {
        PropensityKind::Lr => {
            let opts = LogisticOptions {
                c: lr_c,
                class_weights: ClassWeights::Balanced,
                ..Default::default()
            };
            Box::new(fit_logistic(x, &y, &opts, None)?)
        }
        PropensityKind::Gbm => {
            let w = ClassWeights::Balanced.resolve(&[y.len() - n_t, n_t])?;
            let sw: Vec<f64> = y.iter().map(|&c| w[c]).collect();
            Box::new(fit_gbm(x, &y, gbm, Some(&sw))?)
        }
    };
    x.outer_iter()
        .map(|row| {
            let p = model.predict_proba(&row.to_vec())?[1];
            Ok(p.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
        })
        .collect()
}
