use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_features, sigmoid, Classifier};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmOptions {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbmOptions {
    fn default() -> Self {
        GbmOptions {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a node arena; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Gradient boosting on the logistic loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub n_features: usize,
    /// Initial log-odds.
    pub init: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub trees: Vec<RegressionTree>,
    /// Weighted mean training log-loss before the first round and after
    /// each round.
    pub loss_history: Vec<f64>,
}

impl BoostedModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

impl Classifier for BoostedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        2
    }

    fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(vec![self.margin(x)])
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = sigmoid(self.decision(x)?[0]);
        Ok(vec![1.0 - p, p])
    }
}

fn log_loss(y: f64, f: f64) -> f64 {
    // log(1 + e^f) - y f
    f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    /// Row indices sorted by each feature.
    sorted: &'a [Vec<usize>],
    grad: &'a [f64],
    hess: &'a [f64],
    w: &'a [f64],
    y: &'a [f64],
    f: &'a [f64],
    lr: f64,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &[usize], depth: usize, mask: &mut [bool]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let split = if depth < self.max_depth {
            self.best_split(rows, mask)
        } else {
            None
        };
        match split {
            Some((feature, threshold)) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
                for &i in rows {
                    mask[i] = false;
                }
                for &i in &left {
                    mask[i] = true;
                }
                let l = self.build(&left, depth + 1, mask);
                for &i in &left {
                    mask[i] = false;
                }
                for &i in &right {
                    mask[i] = true;
                }
                let r = self.build(&right, depth + 1, mask);
                for &i in &right {
                    mask[i] = false;
                }
                for &i in rows {
                    mask[i] = true;
                }
                self.nodes[id] = TreeNode::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
            None => {
                let value = self.leaf_value(rows);
                self.nodes[id] = TreeNode::Leaf { value };
            }
        }
        id
    }

    /// Best weighted-SSE split of the negative gradients. Splits with zero
    /// gain are accepted while the node is impure so that interactions
    /// invisible to single splits (XOR) can still be learned. Ties keep the
    /// lowest feature index and threshold.
    fn best_split(&self, rows: &[usize], mask: &[bool]) -> Option<(usize, f64)> {
        if rows.len() < 2 * self.min_leaf {
            return None;
        }
        let (mut sw, mut sg, mut sgg) = (0.0, 0.0, 0.0);
        for &i in rows {
            sw += self.w[i];
            sg += self.w[i] * self.grad[i];
            sgg += self.w[i] * self.grad[i] * self.grad[i];
        }
        if sw <= 0.0 || sgg - sg * sg / sw <= 1e-12 * sw.max(1.0) {
            return None;
        }
        let parent = sg * sg / sw;
        let mut best: Option<(f64, usize, f64)> = None;
        for (feature, order) in self.sorted.iter().enumerate() {
            let (mut lw, mut lg, mut ln) = (0.0, 0.0, 0usize);
            let mut prev: Option<usize> = None;
            for &i in order.iter().filter(|&&i| mask[i]) {
                if let Some(p) = prev {
                    let (a, b) = (self.x[[p, feature]], self.x[[i, feature]]);
                    let rn = rows.len() - ln;
                    if b > a && ln >= self.min_leaf && rn >= self.min_leaf {
                        let rw = sw - lw;
                        if lw > 0.0 && rw > 0.0 {
                            let rg = sg - lg;
                            let gain = lg * lg / lw + rg * rg / rw - parent;
                            if best.map_or(true, |(g, _, _)| gain > g + 1e-12) {
                                best = Some((gain, feature, a + (b - a) / 2.0));
                            }
                        }
                    }
                }
                lw += self.w[i];
                lg += self.w[i] * self.grad[i];
                ln += 1;
                prev = Some(i);
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    /// Newton step for the leaf, halved until it does not increase the
    /// leaf's training loss.
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &i in rows {
            num += self.w[i] * self.grad[i];
            den += self.w[i] * self.hess[i];
        }
        if num == 0.0 {
            return 0.0;
        }
        let mut value = if den > 1e-12 { num / den } else { num.signum() };
        let loss = |v: f64| -> f64 {
            rows.iter()
                .map(|&i| self.w[i] * log_loss(self.y[i], self.f[i] + self.lr * v))
                .sum()
        };
        let base = loss(0.0);
        for _ in 0..60 {
            if loss(value) <= base {
                return value;
            }
            value *= 0.5;
        }
        0.0
    }
}

/// Fits a boosted ensemble of depth-limited regression trees on the
/// logistic loss. `y` holds 0/1 labels.
pub fn fit_gbm(
    x: ArrayView2<f64>,
    y: &[usize],
    opts: &GbmOptions,
    sample_weights: Option<&[f64]>,
) -> Result<BoostedModel> {
    check_features(x)?;
    let m = x.nrows();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if y.iter().any(|&c| c > 1) {
        return Err(Error::InvalidInput("boosting needs binary 0/1 labels".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate.is_finite()) {
        return Err(Error::InvalidInput("learning rate must be positive".into()));
    }
    let w: Vec<f64> = match sample_weights {
        Some(s) if s.len() != m => {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: s.len(),
            })
        }
        Some(s) => {
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput("sample weights must be finite and >= 0".into()));
            }
            s.to_vec()
        }
        None => vec![1.0; m],
    };
    let yf: Vec<f64> = y.iter().map(|&c| c as f64).collect();
    let pos: f64 = w.iter().zip(&yf).map(|(w, y)| w * y).sum();
    let neg: f64 = w.iter().zip(&yf).map(|(w, y)| w * (1.0 - y)).sum();
    if pos <= 0.0 || neg <= 0.0 {
        return Err(Error::Degenerate("boosting needs weight on both classes".into()));
    }
    let init = (pos / neg).ln();
    let total = pos + neg;

    let sorted: Vec<Vec<usize>> = (0..x.ncols())
        .map(|j| {
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| x[[a, j]].total_cmp(&x[[b, j]]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut f = vec![init; m];
    let mean_loss = |f: &[f64]| -> f64 {
        f.iter()
            .zip(&yf)
            .zip(&w)
            .map(|((f, y), w)| w * log_loss(*y, *f))
            .sum::<f64>()
            / total
    };
    let mut loss_history = vec![mean_loss(&f)];
    let mut trees = Vec::with_capacity(opts.rounds);
    let all: Vec<usize> = (0..m).collect();
    let mut mask = vec![true; m];
    for _ in 0..opts.rounds {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let grad: Vec<f64> = yf.iter().zip(&p).map(|(y, p)| y - p).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let mut builder = TreeBuilder {
            x: x.view(),
            sorted: &sorted,
            grad: &grad,
            hess: &hess,
            w: &w,
            y: &yf,
            f: &f,
            lr: opts.learning_rate,
            max_depth: opts.max_depth,
            min_leaf: opts.min_samples_leaf.max(1),
            nodes: Vec::new(),
        };
        builder.build(&all, 0, &mut mask);
        let tree = RegressionTree {
            nodes: builder.nodes,
        };
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            f[i] += opts.learning_rate * tree.predict(&row);
        }
        loss_history.push(mean_loss(&f));
        trees.push(tree);
    }
    Ok(BoostedModel {
        n_features: x.ncols(),
        init,
        learning_rate: opts.learning_rate,
        max_depth: opts.max_depth,
        trees,
        loss_history,
    })
}
