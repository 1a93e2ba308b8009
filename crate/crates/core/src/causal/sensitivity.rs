use serde::{Deserialize, Serialize};

use super::{estimate, EstimateReport, EstimationConfig, StudyCorpus};
use crate::cohort::PolicyTable;
use crate::corpus::Tweet;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRun {
    pub include_retweets: bool,
    pub n_users: usize,
    pub n_tweets: usize,
    pub report: EstimateReport,
}

/// Estimates repeated with and without retweets, over every configured
/// method. Low-population cells stay in the output, flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub runs: Vec<SensitivityRun>,
}

pub fn run_sensitivity(tweets: &[Tweet], cfg: &EstimationConfig, table: &PolicyTable) -> Result<SensitivityReport> {
    let mut runs = Vec::with_capacity(2);
    for include_retweets in [true, false] {
        let corpus = StudyCorpus::from_tweets(tweets, cfg.legalization_date, include_retweets)?;
        tracing::info!(include_retweets, users = corpus.users.len(), "sensitivity run");
        let report = estimate(&corpus, cfg, table)?;
        runs.push(SensitivityRun {
            include_retweets,
            n_users: corpus.users.len(),
            n_tweets: corpus.n_tweets(),
            report,
        });
    }
    Ok(SensitivityReport { runs })
}
