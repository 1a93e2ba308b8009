//! Policy timelines, population selection, treatment/control assignment
//! and horizon outcomes.

mod policy;

use std::fmt;
use std::str::FromStr;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::StateCode;
use crate::error::{Error, Result};

pub use policy::{default_legalization_date, Policy, PolicyTable};

/// Treatment group or one of the four policy-defined control groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    T,
    C1,
    C2,
    C3,
    C4,
}

impl Group {
    pub const CONTROLS: [Group; 4] = [Group::C1, Group::C2, Group::C3, Group::C4];

    pub fn for_control_policy(policy: Policy) -> Group {
        match policy {
            Policy::Illegal => Group::C1,
            Policy::MedicalLimitedThc => Group::C2,
            Policy::Medical => Group::C3,
            Policy::Recreational => Group::C4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::T => "T",
            Group::C1 => "C1",
            Group::C2 => "C2",
            Group::C3 => "C3",
            Group::C4 => "C4",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T" => Ok(Group::T),
            "C1" => Ok(Group::C1),
            "C2" => Ok(Group::C2),
            "C3" => Ok(Group::C3),
            "C4" => Ok(Group::C4),
            other => Err(Error::InvalidInput(format!("unknown group `{other}`"))),
        }
    }
}

/// `date + n` calendar months, clamped to the end of shorter months.
pub fn add_months(date: NaiveDate, n: u32) -> NaiveDate {
    date.checked_add_months(Months::new(n)).expect("date in range")
}

/// Y(N): a first pro-cannabis tweet strictly before `date + N months`.
pub fn outcome(first_pro_date: Option<NaiveDate>, legalization_date: NaiveDate, n: u32) -> bool {
    first_pro_date.is_some_and(|d| d < add_months(legalization_date, n))
}

/// A user's state for one stance draw.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDraw {
    pub user_id: String,
    pub state: Option<StateCode>,
    pub covariates: Vec<f64>,
    pub pro_juul: bool,
    /// Earliest cannabis tweet of any stance.
    pub first_cannabis: Option<NaiveDate>,
    pub first_pro_date: Option<NaiveDate>,
}

/// Eligible users: pro-JUUL before the cutoff and silent about cannabis
/// until the cutoff.
pub fn select_population(users: &[UserDraw], legalization_date: NaiveDate) -> Vec<&UserDraw> {
    users
        .iter()
        .filter(|u| u.pro_juul && u.first_cannabis.map_or(true, |d| d >= legalization_date))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalUnit {
    pub user_id: String,
    pub group: Group,
    pub treated: bool,
    pub covariates: Vec<f64>,
    /// `outcomes[k]` is Y at horizon `horizons[k]`.
    pub outcomes: Vec<bool>,
}

/// Assigns eligible users to T (treatment state) or a control group by the
/// policy of their state on the legalization date.
pub fn assign_groups(
    eligible: &[&UserDraw],
    treatment_state: &StateCode,
    legalization_date: NaiveDate,
    table: &PolicyTable,
    horizons: &[u32],
) -> Result<Vec<CausalUnit>> {
    eligible
        .iter()
        .map(|u| {
            let state = u
                .state
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("user {} has no state", u.user_id)))?;
            let group = if state == treatment_state {
                Group::T
            } else {
                Group::for_control_policy(table.policy_at(state, legalization_date)?)
            };
            Ok(CausalUnit {
                user_id: u.user_id.clone(),
                group,
                treated: group == Group::T,
                covariates: u.covariates.clone(),
                outcomes: horizons
                    .iter()
                    .map(|&n| outcome(u.first_pro_date, legalization_date, n))
                    .collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn user(id: &str, state: &str, pro: bool, first_cannabis: Option<NaiveDate>) -> UserDraw {
        UserDraw {
            user_id: id.into(),
            state: Some(StateCode::new(state).unwrap()),
            covariates: vec![0.0],
            pro_juul: pro,
            first_cannabis,
            first_pro_date: None,
        }
    }

    #[test]
    fn month_arithmetic_clamps() {
        assert_eq!(add_months(d(2018, 1, 31), 1), d(2018, 2, 28));
        assert_eq!(add_months(d(2017, 7, 28), 6), d(2018, 1, 28));
    }

    #[test]
    fn outcome_horizons() {
        let cut = d(2018, 1, 1);
        let first = Some(d(2018, 3, 1));
        assert!(!outcome(first, cut, 1));
        assert!(!outcome(first, cut, 2));
        assert!(outcome(first, cut, 3));
        assert!((1..=6).all(|n| !outcome(None, cut, n)));
    }

    #[test]
    fn eligibility() {
        let cut = d(2018, 1, 1);
        let users = vec![
            user("never", "CA", true, None),
            user("day_before", "CA", true, Some(d(2017, 12, 31))),
            user("on_day", "CA", true, Some(cut)),
            user("anti", "CA", false, None),
        ];
        let ids: Vec<&str> = select_population(&users, cut).iter().map(|u| u.user_id.as_str()).collect();
        assert_eq!(ids, vec!["never", "on_day"]);
    }

    #[test]
    fn grouping_by_policy() {
        let cut = d(2018, 1, 1);
        let users = vec![
            user("a", "CA", true, None),
            user("b", "ID", true, None),
            user("c", "TX", true, None),
            user("d", "NY", true, None),
            user("e", "CO", true, None),
            user("f", "DC", true, None),
        ];
        let refs: Vec<&UserDraw> = users.iter().collect();
        let ca = StateCode::new("CA").unwrap();
        let units = assign_groups(&refs, &ca, cut, &PolicyTable::builtin(), &[1, 2]).unwrap();
        let groups: Vec<Group> = units.iter().map(|u| u.group).collect();
        assert_eq!(groups, vec![Group::T, Group::C1, Group::C2, Group::C3, Group::C4, Group::C4]);
        assert!(units[0].treated && !units[1].treated);
    }
}
