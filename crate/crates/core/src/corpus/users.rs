use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Dataset, StateCode, Tweet};
use crate::error::{Error, Result};

/// Per-user aggregate over retained tweets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    pub state: Option<StateCode>,
    /// Mean of the user's tweet embeddings.
    pub embedding: Vec<f64>,
    pub first_juul: Option<NaiveDate>,
    pub first_cannabis: Option<NaiveDate>,
    pub n_tweets: usize,
}

/// Groups embedded tweets by user. Tweets without an embedding are ignored;
/// users left with none are omitted. Output is sorted by user id.
pub fn build_users(tweets: &[Tweet]) -> Vec<UserRecord> {
    let mut groups: BTreeMap<&str, Vec<&Tweet>> = BTreeMap::new();
    for t in tweets.iter().filter(|t| t.embedding.is_some()) {
        groups.entry(t.user_id.as_str()).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|(id, owned)| {
            let dim = owned[0].embedding.as_ref().map_or(0, Vec::len);
            let mut mean = vec![0.0; dim];
            for t in &owned {
                let x = t.embedding.as_ref().expect("filtered above");
                mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
            }
            let n = owned.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            let first = |ds: Dataset| owned.iter().filter(|t| t.dataset == ds).map(|t| t.date).min();
            UserRecord {
                id: id.to_owned(),
                state: Some(owned[0].state.clone()),
                embedding: mean,
                first_juul: first(Dataset::Juul),
                first_cannabis: first(Dataset::Cannabis),
                n_tweets: owned.len(),
            }
        })
        .collect()
}

/// Known bot account ids, one per line.
#[derive(Debug, Clone, Default)]
pub struct Blocklist {
    ids: HashSet<String>,
}

impl Blocklist {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_ids<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        Blocklist {
            ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn parse(text: &str) -> Self {
        Self::from_ids(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    /// Loads a blocklist file. A missing file is an error unless `disabled`,
    /// in which case the list is empty.
    pub fn load(path: Option<&Path>, disabled: bool) -> Result<Self> {
        if disabled {
            return Ok(Self::empty());
        }
        let path = path.ok_or_else(|| Error::Config {
            path: "paths.blocklist".into(),
            message: "no bot blocklist configured (set filter_bots = false to disable)".into(),
        })?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Removes blocklisted users; returns survivors and the removal count.
pub fn filter_bots(users: Vec<UserRecord>, blocklist: &Blocklist) -> (Vec<UserRecord>, usize) {
    let before = users.len();
    let kept: Vec<_> = users.into_iter().filter(|u| !blocklist.contains(&u.id)).collect();
    let removed = before - kept.len();
    (kept, removed)
}
