//! Tweet ingestion, location parsing, embeddings and per-user aggregation.

mod embedding;
mod ingest;
mod location;
mod users;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{embed_text, embed_tweets, EmbeddingTable};
pub use ingest::{
    ingest, ingest_reader, write_records, DatasetFilter, DropCounts, IngestFilters, IngestReport,
    Malformed, TweetRecord,
};
pub use location::{parse_location, Gazetteer, PatternKind};
pub use users::{build_users, filter_bots, Blocklist, UserRecord};

/// Which keyword collection a tweet belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "JUUL")]
    Juul,
    #[serde(rename = "CANNABIS")]
    Cannabis,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Juul => "JUUL",
            Dataset::Cannabis => "CANNABIS",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "JUUL" => Ok(Dataset::Juul),
            "CANNABIS" => Ok(Dataset::Cannabis),
            other => Err(Error::InvalidInput(format!("unknown dataset `{other}`"))),
        }
    }
}

/// Two-letter U.S. state (or DC) postal code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StateCode(String);

impl StateCode {
    pub fn new(code: &str) -> Result<Self> {
        let code = code.trim().to_ascii_uppercase();
        if code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase()) {
            Ok(StateCode(code))
        } else {
            Err(Error::InvalidInput(format!("invalid state code `{code}`")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StateCode {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        StateCode::new(&value)
    }
}

impl From<StateCode> for String {
    fn from(value: StateCode) -> Self {
        value.0
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Stance probability vector over (InFavor, Against, Neither).
pub type StanceProbs = [f64; 3];

/// One retained post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub user_id: String,
    pub date: NaiveDate,
    pub text: String,
    pub dataset: Dataset,
    pub is_retweet: bool,
    pub lang: String,
    /// Raw self-reported profile location.
    pub location: String,
    pub state: StateCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_personal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<StanceProbs>,
}

impl Tweet {
    /// Validates the stance simplex when present.
    pub fn check_stance(&self) -> Result<()> {
        if let Some(p) = self.stance {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "tweet {}: stance probabilities {p:?} are not a simplex",
                    self.id
                )));
            }
        }
        Ok(())
    }
}
