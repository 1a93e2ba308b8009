use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classify::Classifier;
use crate::corpus::{Dataset, Tweet};
use crate::error::{Error, Result};

/// Per-dataset cutoffs on P(personal); a tweet is personal iff p >= cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonalThresholds {
    pub juul: f64,
    pub cannabis: f64,
}

impl Default for PersonalThresholds {
    fn default() -> Self {
        PersonalThresholds {
            juul: 0.1,
            cannabis: 0.5,
        }
    }
}

impl PersonalThresholds {
    pub fn for_dataset(&self, dataset: Dataset) -> f64 {
        match dataset {
            Dataset::Juul => self.juul,
            Dataset::Cannabis => self.cannabis,
        }
    }
}

/// Fills `p_personal` on every tweet and returns the personal flags.
/// `models` supplies the classifier for each dataset present.
pub fn classify_personal<F, C>(tweets: &mut [Tweet], models: F, thresholds: &PersonalThresholds) -> Result<Vec<bool>>
where
    F: Fn(Dataset) -> Option<C>,
    C: std::ops::Deref,
    C::Target: Classifier,
{
    let mut flags = Vec::with_capacity(tweets.len());
    for t in tweets.iter_mut() {
        let model = models(t.dataset)
            .ok_or_else(|| Error::Untrained(format!("no personal-tweet classifier for {}", t.dataset)))?;
        let x = t
            .embedding
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("tweet {} has no embedding", t.id)))?;
        let p = model.predict_proba(x)?[1];
        t.p_personal = Some(p);
        flags.push(p >= thresholds.for_dataset(t.dataset));
    }
    Ok(flags)
}

/// Users for whom strictly more than half of their tweets are personal.
pub fn majority_personal_users(tweets: &[Tweet], personal: &[bool]) -> BTreeSet<String> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (t, &p) in tweets.iter().zip(personal) {
        let e = tally.entry(t.user_id.as_str()).or_default();
        e.0 += p as usize;
        e.1 += 1;
    }
    tally
        .into_iter()
        .filter(|(_, (p, n))| 2 * p > *n)
        .map(|(u, _)| u.to_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{LinearModel, Model};
    use crate::corpus::StateCode;
    use chrono::NaiveDate;
    use ndarray::array;

    fn tweet(user: &str, x: f64) -> Tweet {
        Tweet {
            id: format!("{user}-{x}"),
            user_id: user.into(),
            date: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            text: String::new(),
            dataset: Dataset::Cannabis,
            is_retweet: false,
            lang: "en".into(),
            location: String::new(),
            state: StateCode::new("CA").unwrap(),
            embedding: Some(vec![x]),
            p_personal: None,
            stance: None,
        }
    }

    fn identity_model() -> Model {
        // Margin = x, so p = sigmoid(x).
        Model::Linear(LinearModel {
            n_classes: 2,
            weights: array![[1.0]],
            bias: array![0.0],
            c: 1.0,
            class_weights: vec![1.0, 1.0],
            iterations: 0,
            converged: true,
        })
    }

    #[test]
    fn boundary_probability_counts_as_personal() {
        let m = identity_model();
        let mut tweets = vec![tweet("a", 0.0), tweet("a", -1.0)];
        let flags = classify_personal(&mut tweets, |_| Some(&m), &PersonalThresholds::default()).unwrap();
        assert_eq!(flags, vec![true, false]);
        assert_eq!(tweets[0].p_personal, Some(0.5));
    }

    #[test]
    fn missing_model_is_untrained() {
        let mut tweets = vec![tweet("a", 0.0)];
        let err = classify_personal(&mut tweets, |_| None::<&Model>, &PersonalThresholds::default()).unwrap_err();
        assert!(matches!(err, Error::Untrained(_)));
    }

    #[test]
    fn strict_majority_rule() {
        let tweets: Vec<Tweet> = ["a", "a", "a", "a", "a", "b", "b"].iter().map(|u| tweet(u, 0.0)).collect();
        let flags = [true, true, true, false, false, true, false];
        let kept = majority_personal_users(&tweets, &flags);
        assert!(kept.contains("a"));
        assert!(!kept.contains("b"));
    }
}
