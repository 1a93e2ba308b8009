use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, BoostedModel, Classifier, LinearModel};
use crate::error::{Error, Result};

/// Models that can sit under a calibration layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    Linear(LinearModel),
    Boosted(BoostedModel),
}

impl BaseModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            BaseModel::Linear(m) => m,
            BaseModel::Boosted(m) => m,
        }
    }
}

impl Classifier for BaseModel {
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

/// `p = sigmoid(a * score + b)` with `a >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidMap {
    pub a: f64,
    pub b: f64,
}

impl SigmoidMap {
    pub fn apply(&self, score: f64) -> f64 {
        sigmoid(self.a * score + self.b)
    }
}

fn platt_objective(scores: &[f64], targets: &[f64], a: f64, b: f64) -> (f64, [f64; 2], [f64; 3]) {
    let mut value = 0.0;
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    for (&s, &t) in scores.iter().zip(targets) {
        let z = a * s + b;
        value += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
        let p = sigmoid(z);
        let r = p - t;
        g[0] += r * s;
        g[1] += r;
        let q = p * (1.0 - p);
        h[0] += q * s * s;
        h[1] += q * s;
        h[2] += q;
    }
    (value, g, h)
}

/// Platt scaling with the usual smoothed targets `(N+ + 1)/(N+ + 2)` and
/// `1/(N- + 2)`. The slope is constrained to be non-negative so that the
/// map never reverses the base model's ranking.
pub fn fit_platt(scores: &[f64], labels: &[bool]) -> Result<SigmoidMap> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite calibration score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::Degenerate("calibration holdout is missing a class".into()));
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();
    let intercept_only = || {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        SigmoidMap {
            a: 0.0,
            b: (mean / (1.0 - mean)).ln(),
        }
    };

    let (mut a, mut b) = (0.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let (mut value, mut g, mut h) = platt_objective(scores, &targets, a, b);
    for _ in 0..200 {
        if g[0].abs().max(g[1].abs()) < 1e-10 * (1.0 + scores.len() as f64) {
            break;
        }
        let ridge = 1e-12 * (h[0] + h[2]).max(1.0);
        let (h00, h01, h11) = (h[0] + ridge, h[1], h[2] + ridge);
        let det = h00 * h11 - h01 * h01;
        let (mut da, mut db) = if det > 0.0 {
            (-(h11 * g[0] - h01 * g[1]) / det, -(h00 * g[1] - h01 * g[0]) / det)
        } else {
            (-g[0], -g[1])
        };
        let slope = da * g[0] + db * g[1];
        if slope >= 0.0 {
            da = -g[0];
            db = -g[1];
        }
        let slope = da * g[0] + db * g[1];
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-16 {
            let (na, nb) = (a + step * da, b + step * db);
            let (v, ng, nh) = platt_objective(scores, &targets, na, nb);
            if v <= value + 1e-4 * step * slope {
                a = na;
                b = nb;
                value = v;
                g = ng;
                h = nh;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if a < 0.0 {
        return Ok(intercept_only());
    }
    Ok(SigmoidMap { a, b })
}

/// A base model followed by per-class sigmoid maps on its raw scores.
/// Multi-class outputs are renormalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub base: BaseModel,
    pub maps: Vec<SigmoidMap>,
}

impl CalibratedModel {
    /// Fits the maps on held-out rows the base model has not seen.
    pub fn fit(base: BaseModel, x_holdout: ArrayView2<f64>, y_holdout: &[usize]) -> Result<Self> {
        if x_holdout.nrows() != y_holdout.len() {
            return Err(Error::DimensionMismatch {
                expected: x_holdout.nrows(),
                found: y_holdout.len(),
            });
        }
        let k = base.n_classes();
        for c in 0..k {
            if !y_holdout.contains(&c) {
                return Err(Error::Degenerate(format!("calibration holdout is missing class {c}")));
            }
        }
        let scores: Vec<Vec<f64>> = x_holdout
            .outer_iter()
            .map(|row| base.decision(&row.to_vec()))
            .collect::<Result<_>>()?;
        let maps = if k == 2 {
            let s: Vec<f64> = scores.iter().map(|z| z[0]).collect();
            let l: Vec<bool> = y_holdout.iter().map(|&c| c == 1).collect();
            vec![fit_platt(&s, &l)?]
        } else {
            (0..k)
                .map(|c| {
                    let s: Vec<f64> = scores.iter().map(|z| z[c]).collect();
                    let l: Vec<bool> = y_holdout.iter().map(|&y| y == c).collect();
                    fit_platt(&s, &l)
                })
                .collect::<Result<_>>()?
        };
        Ok(CalibratedModel { base, maps })
    }
}

const P_FLOOR: f64 = 1e-12;

impl Classifier for CalibratedModel {
    fn n_features(&self) -> usize {
        self.base.n_features()
    }

    fn n_classes(&self) -> usize {
        self.base.n_classes()
    }

    fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.base.decision(x)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.base.decision(x)?;
        if self.maps.len() == 1 {
            let q = self.maps[0].apply(z[0]).clamp(P_FLOOR, 1.0 - P_FLOOR);
            return Ok(vec![1.0 - q, q]);
        }
        let mut q: Vec<f64> = self
            .maps
            .iter()
            .zip(&z)
            .map(|(m, s)| m.apply(*s).clamp(P_FLOOR, 1.0 - P_FLOOR))
            .collect();
        let sum: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= sum);
        Ok(q)
    }
}

/// Seeded stratified split; returns `(train, holdout)` row indices, each
/// sorted. Every class with at least two rows contributes at least one
/// holdout row.
pub fn stratified_split(y: &[usize], holdout_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidInput("holdout fraction must be in (0, 1)".into()));
    }
    let k = y.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for c in 0..k {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let mut n_hold = (n as f64 * holdout_fraction).round() as usize;
        if n >= 2 {
            n_hold = n_hold.clamp(1, n - 1);
        }
        holdout.extend_from_slice(&idx[..n_hold.min(n)]);
        train.extend_from_slice(&idx[n_hold.min(n)..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

/// Fits `fit_base` on a stratified `1 - holdout_fraction` share of the data
/// and calibrates on the rest.
pub fn calibrate_with_holdout<F>(
    x: ArrayView2<f64>,
    y: &[usize],
    holdout_fraction: f64,
    seed: u64,
    fit_base: F,
) -> Result<CalibratedModel>
where
    F: FnOnce(ArrayView2<f64>, &[usize]) -> Result<BaseModel>,
{
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let (train, holdout) = stratified_split(y, holdout_fraction, seed)?;
    let x_train = x.select(Axis(0), &train);
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let x_hold = x.select(Axis(0), &holdout);
    let y_hold: Vec<usize> = holdout.iter().map(|&i| y[i]).collect();
    let base = fit_base(x_train.view(), &y_train)?;
    CalibratedModel::fit(base, x_hold.view(), &y_hold)
}
