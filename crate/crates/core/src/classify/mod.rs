//! Shared supervised learners: class-weighted logistic regression, gradient
//! boosted trees and Platt-style calibration.

mod calibration;
mod gbm;
mod logistic;

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibration::{
    calibrate_with_holdout, fit_platt, stratified_split, BaseModel, CalibratedModel, SigmoidMap,
};
pub use gbm::{fit_gbm, BoostedModel, GbmOptions, RegressionTree, TreeNode};
pub use logistic::{fit_logistic, ClassWeights, LinearModel, LogisticObjective, LogisticOptions};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted probabilistic classifier over dense feature rows.
pub trait Classifier {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;

    /// Raw scores before the link: one margin for binary models, one logit
    /// per class otherwise.
    fn decision(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn predict_proba_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes()));
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            let p = self.predict_proba(&row)?;
            out.row_mut(i).iter_mut().zip(p).for_each(|(o, v)| *o = v);
        }
        Ok(out)
    }
}

/// Any model the pipeline can persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Boosted(BoostedModel),
    Calibrated(CalibratedModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: Model,
}

impl Model {
    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Linear(m) => m,
            Model::Boosted(m) => m,
            Model::Calibrated(m) => m,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().decision(x)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().predict_proba(x)
    }
}

/// Stacks equal-length rows into a matrix.
pub fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(rows.len() * d);
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), d), flat).expect("shape checked"))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub(crate) fn check_features(x: ArrayView2<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    Ok(())
}

/// Per-class counts for labels `0..k`; every class must be present and
/// there must be at least two.
pub(crate) fn class_counts(y: &[usize]) -> Result<Vec<usize>> {
    let k = y.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &c in y {
        counts[c] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Degenerate("need at least two classes".into()));
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(format!("class {missing} has no examples")));
    }
    Ok(counts)
}
