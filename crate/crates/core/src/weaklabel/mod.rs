//! Personal-tweet selection by weak supervision: labeling functions, a
//! generative label model, and a discriminative classifier trained on
//! confident weak labels.

mod label_model;
mod lf;
mod personal;
mod selection;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::classify::{
    fit_gbm, fit_logistic, rows_to_array, BoostedModel, Classifier, GbmOptions, LogisticOptions,
};
use crate::corpus::Tweet;
use crate::error::{Error, Result};

pub use label_model::{fit_label_model, infer_weak_labels, LabelModel, LabelModelOptions};
pub use lf::{
    apply_labeling_functions, lf_external, lf_first_person, lf_subjectivity, lf_url, load_scores,
    LfVote, SubjectivityLexicon, EXTERNAL_HIGH, EXTERNAL_LOW, FIRST_PERSON, SUBJECTIVITY_HIGH,
    SUBJECTIVITY_LOW,
};
pub use personal::{classify_personal, majority_personal_users, PersonalThresholds};
pub use selection::{domain_select, select_weighted_training, WeightedSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeakLabelOptions {
    pub label_model: LabelModelOptions,
    pub confidence_threshold: f64,
    pub sample_size: usize,
    pub gbm: GbmOptions,
}

impl Default for WeakLabelOptions {
    fn default() -> Self {
        WeakLabelOptions {
            label_model: LabelModelOptions::default(),
            confidence_threshold: 0.8,
            sample_size: 20_000,
            gbm: GbmOptions::default(),
        }
    }
}

/// Everything produced while training one personal-tweet classifier.
#[derive(Debug, Clone)]
pub struct WeakLabelOutcome {
    pub votes: Vec<[LfVote; 4]>,
    pub label_model: LabelModel,
    pub weak_labels: Vec<f64>,
    pub sample: WeightedSample,
    pub classifier: BoostedModel,
    /// True when LF4 scores came from the built-in fallback scorer.
    pub fallback_scorer: bool,
}

/// Stand-in for LF4 when no external personal-experience scores exist: a
/// balanced logistic model on tweet embeddings trained on rows where LF1
/// and LF2 agree on Personal (positives) or LF1 says NonPersonal and LF2
/// abstains (negatives). Returns `None` when either side is empty.
pub fn fallback_scores(tweets: &[Tweet], lf1: &[LfVote], lf2: &[LfVote]) -> Result<Option<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, t) in tweets.iter().enumerate() {
        let label = match (lf1[i], lf2[i]) {
            (LfVote::Personal, LfVote::Personal) => 1,
            (LfVote::NonPersonal, LfVote::Abstain) => 0,
            _ => continue,
        };
        rows.push(embedding(t)?.to_vec());
        labels.push(label);
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        tracing::warn!("fallback scorer has no contrasting examples; LF4 will abstain");
        return Ok(None);
    }
    let x = rows_to_array(&rows)?;
    let model = fit_logistic(x.view(), &labels, &LogisticOptions::default(), None)?;
    tweets
        .iter()
        .map(|t| Ok(model.predict_proba(embedding(t)?)?[1]))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn embedding(t: &Tweet) -> Result<&[f64]> {
    t.embedding
        .as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("tweet {} has no embedding", t.id)))
}

/// Runs the full weak-supervision chain on one dataset's tweets.
/// `scores` maps tweet id to an external personal-experience score; when
/// `None`, [`fallback_scores`] provides LF4's input.
pub fn train_personal_classifier(
    tweets: &[Tweet],
    lexicon: &SubjectivityLexicon,
    scores: Option<&HashMap<String, f64>>,
    opts: &WeakLabelOptions,
    seed: u64,
) -> Result<WeakLabelOutcome> {
    let lf1: Vec<LfVote> = tweets.iter().map(|t| lf_url(&t.text)).collect();
    let lf2: Vec<LfVote> = tweets.iter().map(|t| lf_first_person(&t.text)).collect();
    let (external, fallback_scorer): (Vec<Option<f64>>, bool) = match scores {
        Some(s) => (tweets.iter().map(|t| s.get(&t.id).copied()).collect(), false),
        None => match fallback_scores(tweets, &lf1, &lf2)? {
            Some(v) => (v.into_iter().map(Some).collect(), true),
            None => (vec![None; tweets.len()], true),
        },
    };
    let votes: Vec<[LfVote; 4]> = tweets
        .iter()
        .zip(&external)
        .map(|(t, s)| apply_labeling_functions(&t.text, lexicon, *s))
        .collect();
    let label_model = fit_label_model(&votes, &opts.label_model)?;
    let weak_labels = infer_weak_labels(&votes, &label_model);
    let sample = select_weighted_training(&weak_labels, opts.confidence_threshold, opts.sample_size, seed)?;
    let rows: Vec<Vec<f64>> = sample
        .indices
        .iter()
        .map(|&i| embedding(&tweets[i]).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let x = rows_to_array(&rows)?;
    let classifier = fit_gbm(x.view(), &sample.labels, &opts.gbm, Some(&sample.weights))?;
    Ok(WeakLabelOutcome {
        votes,
        label_model,
        weak_labels,
        sample,
        classifier,
        fallback_scorer,
    })
}
