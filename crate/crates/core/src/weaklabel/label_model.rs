use serde::{Deserialize, Serialize};

use super::LfVote;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelModelOptions {
    pub max_iter: usize,
    /// Stop once the log-likelihood gain of an EM step falls below this.
    pub tol: f64,
    pub init_accuracy: f64,
    pub min_rows: usize,
}

impl Default for LabelModelOptions {
    fn default() -> Self {
        LabelModelOptions {
            max_iter: 100,
            tol: 1e-8,
            init_accuracy: 0.7,
            min_rows: 50,
        }
    }
}

const ACC_CLAMP: f64 = 1e-6;

/// Two-class generative model over labeling-function votes. Each LF
/// abstains independently of the class and, when it votes, is correct with
/// its own accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModel {
    pub accuracies: Vec<f64>,
    /// Fraction of rows on which each LF abstained.
    pub abstain_rates: Vec<f64>,
    /// P(Personal).
    pub prior: f64,
    /// LFs that never voted; their accuracy is left at initialization.
    pub no_evidence: Vec<bool>,
    /// Observed-data log-likelihood at initialization and after each step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

fn vote_factor(vote: LfVote, acc: f64) -> (f64, f64) {
    match vote {
        LfVote::Personal => (acc, 1.0 - acc),
        LfVote::NonPersonal => (1.0 - acc, acc),
        LfVote::Abstain => (1.0, 1.0),
    }
}

/// Log joint of a row under each class, excluding abstention terms (which
/// do not depend on the class).
fn log_joint(row: &[LfVote], accuracies: &[f64], prior: f64) -> (f64, f64) {
    let (mut lp, mut ln) = (prior.ln(), (1.0 - prior).ln());
    for (&v, &a) in row.iter().zip(accuracies) {
        let (fp, fn_) = vote_factor(v, a);
        lp += fp.ln();
        ln += fn_.ln();
    }
    (lp, ln)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl LabelModel {
    /// P(Personal | votes). All-abstain rows get the prior.
    pub fn posterior(&self, row: &[LfVote]) -> f64 {
        let (lp, ln) = log_joint(row, &self.accuracies, self.prior);
        1.0 / (1.0 + (ln - lp).exp())
    }

    /// Observed-data log-likelihood, abstention terms included.
    pub fn log_likelihood_of<R: AsRef<[LfVote]>>(&self, votes: &[R]) -> f64 {
        total_log_likelihood(votes, &self.accuracies, &self.abstain_rates, self.prior)
    }
}

fn total_log_likelihood<R: AsRef<[LfVote]>>(
    votes: &[R],
    accuracies: &[f64],
    abstain_rates: &[f64],
    prior: f64,
) -> f64 {
    let mut total = 0.0;
    for row in votes {
        let row = row.as_ref();
        let (lp, ln) = log_joint(row, accuracies, prior);
        total += log_sum_exp(lp, ln);
        for (&v, &b) in row.iter().zip(abstain_rates) {
            total += if v == LfVote::Abstain { b.ln() } else { (1.0 - b).ln() };
        }
    }
    total
}

/// Fits the label model by expectation-maximization.
pub fn fit_label_model<R: AsRef<[LfVote]>>(votes: &[R], opts: &LabelModelOptions) -> Result<LabelModel> {
    let m = votes.len();
    if m < opts.min_rows {
        return Err(Error::InvalidInput(format!(
            "label model needs at least {} rows, got {m}",
            opts.min_rows
        )));
    }
    let n_lf = votes.first().map_or(0, |r| r.as_ref().len());
    if votes.iter().any(|r| r.as_ref().len() != n_lf) {
        return Err(Error::InvalidInput("ragged vote matrix".into()));
    }
    if !(opts.init_accuracy > 0.0 && opts.init_accuracy < 1.0) {
        return Err(Error::InvalidInput("initial accuracy must be in (0, 1)".into()));
    }
    let mut n_votes = vec![0usize; n_lf];
    let (mut pos, mut neg) = (0usize, 0usize);
    for row in votes {
        for (j, v) in row.as_ref().iter().enumerate() {
            match v {
                LfVote::Personal => pos += 1,
                LfVote::NonPersonal => neg += 1,
                LfVote::Abstain => continue,
            }
            n_votes[j] += 1;
        }
    }
    if pos + neg == 0 {
        return Err(Error::NoSignal("every labeling function abstained on every row".into()));
    }
    let no_evidence: Vec<bool> = n_votes.iter().map(|&n| n == 0).collect();
    for (j, flag) in no_evidence.iter().enumerate() {
        if *flag {
            tracing::warn!(lf = j, "labeling function never voted; accuracy left at initialization");
        }
    }
    // Abstention rates have a closed-form MLE and never change. They are
    // clamped away from 0 and 1 so the likelihood stays finite.
    let abstain_rates: Vec<f64> = n_votes
        .iter()
        .map(|&n| (1.0 - n as f64 / m as f64).clamp(ACC_CLAMP, 1.0 - ACC_CLAMP))
        .collect();
    let mut accuracies = vec![opts.init_accuracy; n_lf];
    let mut prior = (pos as f64 / (pos + neg) as f64).clamp(ACC_CLAMP, 1.0 - ACC_CLAMP);
    let mut history = vec![total_log_likelihood(votes, &accuracies, &abstain_rates, prior)];
    let mut iterations = 0;
    let mut q = vec![0.0; m];

    while iterations < opts.max_iter {
        iterations += 1;
        for (qi, row) in q.iter_mut().zip(votes) {
            let (lp, ln) = log_joint(row.as_ref(), &accuracies, prior);
            *qi = 1.0 / (1.0 + (ln - lp).exp());
        }
        let mut correct = vec![0.0; n_lf];
        for (qi, row) in q.iter().zip(votes) {
            for (j, v) in row.as_ref().iter().enumerate() {
                correct[j] += match v {
                    LfVote::Personal => *qi,
                    LfVote::NonPersonal => 1.0 - qi,
                    LfVote::Abstain => 0.0,
                };
            }
        }
        for j in 0..n_lf {
            if n_votes[j] > 0 {
                accuracies[j] = (correct[j] / n_votes[j] as f64).clamp(ACC_CLAMP, 1.0 - ACC_CLAMP);
            }
        }
        prior = (q.iter().sum::<f64>() / m as f64).clamp(ACC_CLAMP, 1.0 - ACC_CLAMP);
        let ll = total_log_likelihood(votes, &accuracies, &abstain_rates, prior);
        let gain = ll - history.last().copied().unwrap_or(f64::NEG_INFINITY);
        history.push(ll);
        if gain.abs() < opts.tol {
            break;
        }
    }
    Ok(LabelModel {
        accuracies,
        abstain_rates,
        prior,
        no_evidence,
        log_likelihood: history,
        iterations,
    })
}

/// Posterior probability of Personal for every row.
pub fn infer_weak_labels<R: AsRef<[LfVote]>>(votes: &[R], model: &LabelModel) -> Vec<f64> {
    votes.iter().map(|r| model.posterior(r.as_ref())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use LfVote::*;

    fn model(acc: Vec<f64>, prior: f64) -> LabelModel {
        let n = acc.len();
        LabelModel {
            accuracies: acc,
            abstain_rates: vec![0.5; n],
            prior,
            no_evidence: vec![false; n],
            log_likelihood: vec![],
            iterations: 0,
        }
    }

    #[test]
    fn four_agreeing_accurate_votes() {
        let m = model(vec![0.9; 4], 0.5);
        let p = m.posterior(&[Personal; 4]);
        // 0.9^4 / (0.9^4 + 0.1^4)
        assert!((p - 6561.0 / 6562.0).abs() < 1e-12);
        assert!(p > 0.99);
    }

    #[test]
    fn all_abstain_gets_prior() {
        let m = model(vec![0.8; 4], 0.6);
        assert!((m.posterior(&[Abstain; 4]) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn symmetric_conflict_is_even() {
        let m = model(vec![0.75; 4], 0.5);
        let p = m.posterior(&[Personal, NonPersonal, Personal, NonPersonal]);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_abstain_matrix_has_no_signal() {
        let votes = vec![[Abstain; 4]; 60];
        let err = fit_label_model(&votes, &LabelModelOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoSignal(_)));
    }

    #[test]
    fn too_few_rows() {
        let votes = vec![[Personal; 4]; 10];
        assert!(fit_label_model(&votes, &LabelModelOptions::default()).is_err());
    }

    #[test]
    fn silent_lf_keeps_initial_accuracy() {
        let mut votes = Vec::new();
        for i in 0..60 {
            let v = if i % 3 == 0 { NonPersonal } else { Personal };
            votes.push([v, v, if i % 5 == 0 { NonPersonal } else { v }, Abstain]);
        }
        let m = fit_label_model(&votes, &LabelModelOptions::default()).unwrap();
        assert_eq!(m.accuracies[3], 0.7);
        assert!(m.no_evidence[3]);
        assert!(!m.no_evidence[0]);
    }

    #[test]
    fn consensus_lf_is_rated_highest() {
        let mut votes = Vec::new();
        for i in 0..80 {
            let t = if i % 5 < 2 { NonPersonal } else { Personal };
            let flip = |v: LfVote| if v == Personal { NonPersonal } else { Personal };
            let b = if i % 7 == 0 { flip(t) } else { t };
            let c = if i % 4 == 1 { flip(t) } else { t };
            votes.push([t, b, c]);
        }
        let m = fit_label_model(&votes, &LabelModelOptions::default()).unwrap();
        assert!(m.accuracies[0] >= m.accuracies[1] && m.accuracies[0] >= m.accuracies[2], "{:?}", m.accuracies);
    }

    /// Likelihood of the class-dependent part, written out directly.
    fn toy_likelihood(rows: &[[LfVote; 2]], pi: f64, a: [f64; 2]) -> f64 {
        rows.iter()
            .map(|r| {
                let (mut p, mut n) = (pi, 1.0 - pi);
                for (v, acc) in r.iter().zip(a) {
                    match v {
                        Personal => (p, n) = (p * acc, n * (1.0 - acc)),
                        NonPersonal => (p, n) = (p * (1.0 - acc), n * acc),
                        Abstain => {}
                    }
                }
                (p + n).ln()
            })
            .sum()
    }

    #[test]
    fn tiny_matrix_matches_grid_search() {
        let rows = [[Personal, Personal], [NonPersonal, NonPersonal], [Personal, NonPersonal], [Personal, Personal]];
        let opts = LabelModelOptions { min_rows: 4, max_iter: 5000, tol: 1e-14, ..LabelModelOptions::default() };
        let m = fit_label_model(&rows, &opts).unwrap();

        // Coarse-to-fine search over (prior, a1, a2) on the a1 >= 0.5 branch.
        let (mut center, mut half, mut best): ([f64; 3], [f64; 3], f64) = ([0.5, 0.75, 0.5], [0.5, 0.25, 0.5], f64::NEG_INFINITY);
        for _ in 0..6 {
            let steps = 40;
            let mut next = center;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let at = |d: usize, s: usize| {
                            let lo = (center[d] - half[d]).max(if d == 1 { 0.5 } else { 0.0 });
                            let hi = (center[d] + half[d]).min(1.0);
                            lo + (hi - lo) * s as f64 / steps as f64
                        };
                        let p = [at(0, i), at(1, j), at(2, k)];
                        let l = toy_likelihood(&rows, p[0], [p[1], p[2]]);
                        if l > best {
                            best = l;
                            next = p;
                        }
                    }
                }
            }
            center = next;
            half = half.map(|h| h / 8.0);
        }
        assert!((m.prior - center[0]).abs() < 1e-3, "{} vs {:?}", m.prior, center);
        assert!((m.accuracies[0] - center[1]).abs() < 1e-3, "{:?} vs {:?}", m.accuracies, center);
        assert!((m.accuracies[1] - center[2]).abs() < 1e-3, "{:?} vs {:?}", m.accuracies, center);
    }
}
