use serde::{Deserialize, Serialize};

use super::MatchResult;
use crate::error::{Error, Result};

/// Mean over treated units of `Y_t - Y_matched_control`. This averages over
/// the treated only, so it estimates the effect on the treated.
pub fn ate_matched(m: &MatchResult, treated_outcomes: &[bool], control_outcomes: &[bool]) -> Result<f64> {
    if m.pairs.len() != treated_outcomes.len() {
        return Err(Error::InvalidInput("match does not cover every treated unit".into()));
    }
    if m.pairs.is_empty() {
        return Err(Error::EmptyGroup("no treated units".into()));
    }
    let mut total = 0.0;
    for &(t, c) in &m.pairs {
        let yc = *control_outcomes
            .get(c)
            .ok_or_else(|| Error::InvalidInput(format!("matched control {c} out of range")))?;
        total += treated_outcomes[t] as u8 as f64 - yc as u8 as f64;
    }
    Ok(total / m.pairs.len() as f64)
}

/// Divisor applied to the simulation standard deviation in the 95%
/// interval half-width `1.96 * sd / divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMode {
    /// Divide by the number of simulations.
    #[default]
    PaperLiteral,
    /// Divide by the square root of the number of simulations.
    StandardError,
}

impl CiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CiMode::PaperLiteral => "paper_literal",
            CiMode::StandardError => "standard_error",
        }
    }
}

impl std::str::FromStr for CiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" => Ok(CiMode::PaperLiteral),
            "standard_error" => Ok(CiMode::StandardError),
            other => Err(Error::InvalidInput(format!("unknown ci mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteSummary {
    pub mean: f64,
    pub sd: f64,
    pub n_sims: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mode: CiMode,
}

/// Mean, sample standard deviation and 95% interval over per-simulation
/// estimates.
pub fn summarize_ci(values: &[f64], mode: CiMode) -> Result<AteSummary> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput("confidence interval needs at least two simulations".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let divisor = match mode {
        CiMode::PaperLiteral => n as f64,
        CiMode::StandardError => (n as f64).sqrt(),
    };
    let half = 1.96 * sd / divisor;
    Ok(AteSummary {
        mean,
        sd,
        n_sims: n,
        ci_lo: mean - half,
        ci_hi: mean + half,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matched(pairs: Vec<(usize, usize)>) -> MatchResult {
        MatchResult {
            method: "NNM".into(),
            distances: vec![0.0; pairs.len()],
            pairs,
        }
    }

    #[test]
    fn two_pair_fixture() {
        let m = matched(vec![(0, 0), (1, 1)]);
        assert_eq!(ate_matched(&m, &[true, true], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn equal_outcomes_give_zero() {
        let m = matched(vec![(0, 1), (1, 1), (2, 0)]);
        assert_eq!(ate_matched(&m, &[true; 3], &[true; 2]).unwrap(), 0.0);
    }

    #[test]
    fn constant_sims_collapse_interval() {
        let s = summarize_ci(&[0.3; 5], CiMode::PaperLiteral).unwrap();
        assert_eq!((s.ci_lo, s.mean, s.ci_hi), (0.3, 0.3, 0.3));
    }

    #[test]
    fn two_sim_half_widths() {
        let s = summarize_ci(&[0.0, 1.0], CiMode::PaperLiteral).unwrap();
        assert!((s.sd - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.ci_hi - s.mean - 1.96 * 0.5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((s.ci_hi - s.mean - 0.6930).abs() < 1e-4);
        let s = summarize_ci(&[0.0, 1.0], CiMode::StandardError).unwrap();
        assert!((s.ci_hi - s.mean - 0.98).abs() < 1e-12);
        assert!(summarize_ci(&[1.0], CiMode::StandardError).is_err());
    }
}
