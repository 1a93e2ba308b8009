use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::StateCode;
use crate::error::{Error, Result};

const BUILTIN_POLICY: &str = include_str!("../../data/policy.csv");

/// Cannabis policy classes, most restrictive first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    Illegal,
    #[serde(rename = "MedicalLimitedTHC")]
    MedicalLimitedThc,
    Medical,
    Recreational,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Illegal => "Illegal",
            Policy::MedicalLimitedThc => "MedicalLimitedTHC",
            Policy::Medical => "Medical",
            Policy::Recreational => "Recreational",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "illegal" => Ok(Policy::Illegal),
            "medicallimitedthc" | "medical_limited_thc" | "limited_thc" => Ok(Policy::MedicalLimitedThc),
            "medical" => Ok(Policy::Medical),
            "recreational" => Ok(Policy::Recreational),
            other => Err(Error::InvalidInput(format!("unknown policy `{other}`"))),
        }
    }
}

/// Per-state policy timelines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    timelines: BTreeMap<StateCode, Vec<(NaiveDate, Policy)>>,
}

#[derive(Deserialize)]
struct PolicyRow {
    state: String,
    effective_date: NaiveDate,
    policy: String,
}

impl PolicyTable {
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_POLICY.as_bytes()).expect("bundled policy table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Parses `state,effective_date,policy` rows. Dates must be strictly
    /// increasing within each state.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut timelines: BTreeMap<StateCode, Vec<(NaiveDate, Policy)>> = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, row) in rdr.deserialize::<PolicyRow>().enumerate() {
            let line = i + 2;
            let bad = |message: String| Error::Parse { line, message };
            let row = row.map_err(|e| bad(e.to_string()))?;
            let state = StateCode::new(&row.state).map_err(|e| bad(e.to_string()))?;
            let policy: Policy = row.policy.parse().map_err(|e: Error| bad(e.to_string()))?;
            let timeline = timelines.entry(state.clone()).or_default();
            if let Some((last, _)) = timeline.last() {
                if row.effective_date <= *last {
                    return Err(bad(format!("dates for {state} are not strictly increasing")));
                }
            }
            timeline.push((row.effective_date, policy));
        }
        if timelines.is_empty() {
            return Err(Error::InvalidInput("policy table is empty".into()));
        }
        Ok(PolicyTable { timelines })
    }

    pub fn from_timelines(timelines: BTreeMap<StateCode, Vec<(NaiveDate, Policy)>>) -> Result<Self> {
        for (state, t) in &timelines {
            if t.is_empty() || t.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidInput(format!("invalid timeline for {state}")));
            }
        }
        Ok(PolicyTable { timelines })
    }

    pub fn states(&self) -> impl Iterator<Item = &StateCode> {
        self.timelines.keys()
    }

    pub fn timeline(&self, state: &StateCode) -> Option<&[(NaiveDate, Policy)]> {
        self.timelines.get(state).map(Vec::as_slice)
    }

    /// Policy in force on `date`: the entry with the last effective date
    /// not after `date`.
    pub fn policy_at(&self, state: &StateCode, date: NaiveDate) -> Result<Policy> {
        let timeline = self
            .timelines
            .get(state)
            .ok_or_else(|| Error::TimelineIncomplete(format!("no policy timeline for {state}")))?;
        timeline
            .iter()
            .rev()
            .find(|(d, _)| *d <= date)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::TimelineIncomplete(format!("{state} has no policy on or before {date}")))
    }

    /// Checks that every listed state has a policy from `start` onward.
    pub fn check_coverage<'a, I>(&self, states: I, start: NaiveDate) -> Result<()>
    where
        I: IntoIterator<Item = &'a StateCode>,
    {
        for s in states {
            self.policy_at(s, start)?;
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["state", "effective_date", "policy"])?;
        for (state, timeline) in &self.timelines {
            for (d, p) in timeline {
                w.write_record([state.as_str(), &d.to_string(), p.as_str()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<policy csv>", e))?;
        Ok(())
    }
}

/// Recreational legalization dates used when a run names only the state.
pub fn default_legalization_date(state: &StateCode) -> Option<NaiveDate> {
    let (y, m, d) = match state.as_str() {
        "CA" => (2018, 1, 1),
        "MA" => (2017, 7, 28),
        "VT" => (2018, 7, 1),
        _ => return None,
    };
    NaiveDate::from_ymd_opt(y, m, d)
}
