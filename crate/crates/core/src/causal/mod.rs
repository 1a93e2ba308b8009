//! Propensity models, matching, inverse probability weighting, balance
//! diagnostics and the repeated stance-sampling estimation loop.

mod ate;
mod balance;
mod matching;
mod propensity;
mod sensitivity;
mod simulation;
mod weighting;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ate::{ate_matched, summarize_ci, AteSummary, CiMode};
pub use balance::{asmd, asmd_per_dim, median, BalanceReport, ASMD_THRESHOLD};
pub use matching::{cosine_distance, nearest_neighbor, nnm_match, psm_match, MatchResult};
pub use propensity::{fit_propensity, PropensityKind};
pub use sensitivity::{run_sensitivity, SensitivityReport, SensitivityRun};
pub use simulation::{
    draw_users, estimate, run_simulation, run_simulations, summarize_simulations, AteRow, BalanceRow,
    EstimateReport, EstimationConfig, SimBalance, SimCell, SimResult, StudyCorpus, StudyTweet, StudyUser,
};
pub use weighting::{ate_iptw, iptw_weights, IptwWeights};

/// Estimator tag used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    IptwLr,
    IptwGbm,
    PsmLr,
    PsmGbm,
    Nnm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::IptwLr, Method::IptwGbm, Method::PsmLr, Method::PsmGbm, Method::Nnm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IptwLr => "IPTW-LR",
            Method::IptwGbm => "IPTW-GBM",
            Method::PsmLr => "PSM-LR",
            Method::PsmGbm => "PSM-GBM",
            Method::Nnm => "NNM",
        }
    }

    /// Propensity model the estimator depends on; NNM needs none.
    pub fn propensity(self) -> Option<PropensityKind> {
        match self {
            Method::IptwLr | Method::PsmLr => Some(PropensityKind::Lr),
            Method::IptwGbm | Method::PsmGbm => Some(PropensityKind::Gbm),
            Method::Nnm => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<Method> for String {
    fn from(value: Method) -> Self {
        value.as_str().to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("iptw_lr".parse::<Method>().unwrap(), Method::IptwLr);
        assert!("ipw".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::PsmGbm).unwrap(), "\"PSM-GBM\"");
    }
}
