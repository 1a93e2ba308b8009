use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_features, class_counts, sigmoid, softmax_in_place, Classifier};
use crate::error::{Error, Result};

/// How per-class loss weights are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeights {
    /// `m / (k * count_c)` for class `c`.
    Balanced,
    None,
    Explicit(Vec<f64>),
}

impl ClassWeights {
    pub fn resolve(&self, counts: &[usize]) -> Result<Vec<f64>> {
        let k = counts.len();
        match self {
            ClassWeights::None => Ok(vec![1.0; k]),
            ClassWeights::Balanced => {
                let m: usize = counts.iter().sum();
                Ok(counts
                    .iter()
                    .map(|&c| m as f64 / (k as f64 * c as f64))
                    .collect())
            }
            ClassWeights::Explicit(w) => {
                if w.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: w.len(),
                    });
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidInput("class weights must be finite and >= 0".into()));
                }
                Ok(w.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// Inverse regularization strength; the penalty is `||W||^2 / (2C)`.
    pub c: f64,
    pub class_weights: ClassWeights,
    pub max_iter: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub tol: f64,
    /// Starting parameters in the flattened layout of [`LogisticObjective`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            c: 1.0,
            class_weights: ClassWeights::Balanced,
            max_iter: 10_000,
            tol: 1e-6,
            init: None,
        }
    }
}

/// Binary (sigmoid, one weight row) or multinomial (softmax, one row per
/// class) logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub n_classes: usize,
    /// `[1 x d]` for binary models, `[k x d]` otherwise.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub c: f64,
    pub class_weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted cross-entropy plus L2 penalty on the weights (biases free).
///
/// Parameters are flattened row-major as `[W (rows x d), b (rows)]` where
/// `rows = 1` for two classes and `rows = k` otherwise.
pub struct LogisticObjective<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    sample_weights: Vec<f64>,
    n_classes: usize,
    c: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(
        x: ArrayView2<'a, f64>,
        y: &'a [usize],
        n_classes: usize,
        c: f64,
        sample_weights: Vec<f64>,
    ) -> Self {
        LogisticObjective {
            x,
            y,
            sample_weights,
            n_classes,
            c,
        }
    }

    fn rows(&self) -> usize {
        if self.n_classes == 2 {
            1
        } else {
            self.n_classes
        }
    }

    pub fn n_params(&self) -> usize {
        self.rows() * (self.x.ncols() + 1)
    }

    /// Objective value and gradient at `params`.
    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let d = self.x.ncols();
        let rows = self.rows();
        let (w, b) = params.split_at(rows * d);
        let mut grad = vec![0.0; params.len()];
        let mut value = 0.0;
        let mut z = vec![0.0; rows];
        for (i, xi) in self.x.outer_iter().enumerate() {
            let s = self.sample_weights[i];
            if s == 0.0 {
                continue;
            }
            for r in 0..rows {
                z[r] = b[r] + w[r * d..(r + 1) * d].iter().zip(xi).map(|(a, v)| a * v).sum::<f64>();
            }
            let residuals: Vec<f64> = if rows == 1 {
                let yi = (self.y[i] == 1) as u8 as f64;
                // log(1 + e^z) - y z, computed stably.
                let zz = z[0];
                value += s * (zz.max(0.0) + (-zz.abs()).exp().ln_1p() - yi * zz);
                vec![sigmoid(zz) - yi]
            } else {
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                value += s * (lse - z[self.y[i]]);
                (0..rows)
                    .map(|r| (z[r] - lse).exp() - (self.y[i] == r) as u8 as f64)
                    .collect()
            };
            for (r, res) in residuals.iter().enumerate() {
                let g = s * res;
                grad[rows * d + r] += g;
                for (gj, v) in grad[r * d..(r + 1) * d].iter_mut().zip(xi) {
                    *gj += g * v;
                }
            }
        }
        for (j, wj) in w.iter().enumerate() {
            value += wj * wj / (2.0 * self.c);
            grad[j] += wj / self.c;
        }
        (value, grad)
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.value_and_gradient(params).0
    }

    fn hessian(&self, params: &[f64]) -> DMatrix<f64> {
        let d = self.x.ncols();
        let rows = self.rows();
        let p = d + 1;
        let n = rows * p;
        let (w, b) = params.split_at(rows * d);
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut xt = vec![0.0; p];
        let mut z = vec![0.0; rows];
        // Parameter index of feature j (j == d is the bias) in row r.
        let idx = |r: usize, j: usize| if j < d { r * d + j } else { rows * d + r };
        for (i, xi) in self.x.outer_iter().enumerate() {
            let s = self.sample_weights[i];
            if s == 0.0 {
                continue;
            }
            xt[..d].iter_mut().zip(xi).for_each(|(a, v)| *a = *v);
            xt[d] = 1.0;
            for r in 0..rows {
                z[r] = b[r] + w[r * d..(r + 1) * d].iter().zip(xi).map(|(a, v)| a * v).sum::<f64>();
            }
            let probs: Vec<f64> = if rows == 1 {
                vec![sigmoid(z[0])]
            } else {
                let mut p = z.clone();
                softmax_in_place(&mut p);
                p
            };
            for ra in 0..rows {
                for rb in ra..rows {
                    let coef = if rows == 1 {
                        probs[0] * (1.0 - probs[0])
                    } else if ra == rb {
                        probs[ra] * (1.0 - probs[ra])
                    } else {
                        -probs[ra] * probs[rb]
                    };
                    let coef = s * coef;
                    if coef == 0.0 {
                        continue;
                    }
                    for ja in 0..p {
                        let ca = coef * xt[ja];
                        let ia = idx(ra, ja);
                        for jb in 0..p {
                            h[(ia, idx(rb, jb))] += ca * xt[jb];
                        }
                    }
                }
            }
        }
        // Mirror the upper block triangle.
        for ra in 0..rows {
            for rb in (ra + 1)..rows {
                for ja in 0..p {
                    for jb in 0..p {
                        h[(idx(rb, jb), idx(ra, ja))] = h[(idx(ra, ja), idx(rb, jb))];
                    }
                }
            }
        }
        for j in 0..rows * d {
            h[(j, j)] += 1.0 / self.c;
        }
        h
    }
}

fn newton_direction(h: DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let g = DVector::from_column_slice(grad);
    let n = grad.len();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    // Softmax biases are only identified up to a shared shift, so a small
    // ridge keeps the factorization definite.
    let mut ridge = 1e-10 * scale;
    for _ in 0..12 {
        let mut damped = h.clone();
        for i in 0..n {
            damped[(i, i)] += ridge;
        }
        if let Some(chol) = damped.cholesky() {
            return (-chol.solve(&g)).iter().copied().collect();
        }
        ridge *= 100.0;
    }
    grad.iter().map(|v| -v).collect()
}

/// Fits logistic regression by Newton iterations with a backtracking
/// (Armijo) line search. Stops when the gradient infinity norm drops below
/// `opts.tol` or after `opts.max_iter` iterations.
pub fn fit_logistic(
    x: ArrayView2<f64>,
    y: &[usize],
    opts: &LogisticOptions,
    sample_weights: Option<&[f64]>,
) -> Result<LinearModel> {
    check_features(x)?;
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(Error::InvalidInput("regularization C must be positive".into()));
    }
    let counts = class_counts(y)?;
    let k = counts.len();
    let class_weights = opts.class_weights.resolve(&counts)?;
    let sw: Vec<f64> = match sample_weights {
        Some(s) => {
            if s.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: y.len(),
                    found: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput("sample weights must be finite and >= 0".into()));
            }
            y.iter().zip(s).map(|(&c, &w)| w * class_weights[c]).collect()
        }
        None => y.iter().map(|&c| class_weights[c]).collect(),
    };
    let objective = LogisticObjective::new(x.view(), y, k, opts.c, sw);
    let n_params = objective.n_params();
    let mut params = match &opts.init {
        Some(init) if init.len() == n_params => init.clone(),
        Some(init) => {
            return Err(Error::DimensionMismatch {
                expected: n_params,
                found: init.len(),
            })
        }
        None => vec![0.0; n_params],
    };

    let (mut value, mut grad) = objective.value_and_gradient(&params);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = newton_direction(objective.hessian(&params), &grad);
        let mut slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            let (v, g) = objective.value_and_gradient(&trial);
            if v <= value + 1e-4 * step * slope {
                accepted = Some((trial, v, g));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, v, g)) if v < value => {
                params = p;
                value = v;
                grad = g;
            }
            // No representable decrease left: we are at the optimum to
            // machine precision.
            _ => {
                converged = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol.sqrt();
                break;
            }
        }
    }
    if !converged && grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol {
        converged = true;
    }
    if !converged {
        tracing::warn!(iterations, "logistic regression did not reach tolerance");
    }

    let d = x.ncols();
    let rows = if k == 2 { 1 } else { k };
    let weights = Array2::from_shape_vec((rows, d), params[..rows * d].to_vec())
        .expect("parameter layout");
    let bias = Array1::from(params[rows * d..].to_vec());
    Ok(LinearModel {
        n_classes: k,
        weights,
        bias,
        c: opts.c,
        class_weights,
        iterations,
        converged,
    })
}

impl LinearModel {
    /// Flattened parameters in the [`LogisticObjective`] layout.
    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(self.bias.iter()).copied().collect()
    }
}

impl Classifier for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(self
            .weights
            .outer_iter()
            .zip(self.bias.iter())
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect())
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.decision(x)?;
        if self.n_classes == 2 {
            let p = sigmoid(z[0]);
            Ok(vec![1.0 - p, p])
        } else {
            softmax_in_place(&mut z);
            Ok(z)
        }
    }
}
