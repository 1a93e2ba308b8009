use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IptwWeights {
    pub weights: Vec<f64>,
    /// Units whose score lies inside the inclusive trim interval.
    pub kept: Vec<bool>,
}

impl IptwWeights {
    pub fn n_trimmed(&self) -> usize {
        self.kept.iter().filter(|&&k| !k).count()
    }
}

/// `w = T/e + (1 - T)/(1 - e)`; units with `e` outside `[lo, hi]` are
/// excluded from the pseudo-population.
pub fn iptw_weights(scores: &[f64], treated: &[bool], trim: (f64, f64)) -> Result<IptwWeights> {
    if scores.len() != treated.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: treated.len(),
        });
    }
    let (lo, hi) = trim;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::InvalidInput(format!("invalid trim bounds [{lo}, {hi}]")));
    }
    let mut weights = Vec::with_capacity(scores.len());
    let mut kept = Vec::with_capacity(scores.len());
    for (&e, &t) in scores.iter().zip(treated) {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidInput(format!("propensity score {e} outside (0, 1)")));
        }
        weights.push(if t { 1.0 / e } else { 1.0 / (1.0 - e) });
        kept.push(e >= lo && e <= hi);
    }
    Ok(IptwWeights { weights, kept })
}

/// Normalized (Hajek) IPTW difference of weighted outcome means over kept
/// units.
pub fn ate_iptw(treated: &[bool], outcomes: &[bool], weights: &IptwWeights) -> Result<f64> {
    let n = treated.len();
    if outcomes.len() != n || weights.weights.len() != n || weights.kept.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: outcomes.len(),
        });
    }
    let (mut wt, mut wty, mut wc, mut wcy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        if !weights.kept[i] {
            continue;
        }
        let w = weights.weights[i];
        let y = outcomes[i] as u8 as f64;
        if treated[i] {
            wt += w;
            wty += w * y;
        } else {
            wc += w;
            wcy += w * y;
        }
    }
    if wt == 0.0 || wc == 0.0 {
        return Err(Error::EmptyGroup("a group is empty after trimming".into()));
    }
    Ok(wty / wt - wcy / wc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let w = iptw_weights(&[0.5, 0.5, 0.2, 0.96], &[true, false, true, false], (0.05, 0.95)).unwrap();
        assert_eq!(w.weights[0], 2.0);
        assert_eq!(w.weights[1], 2.0);
        assert_eq!(w.weights[2], 5.0);
        assert_eq!(w.kept, vec![true, true, true, false]);
        assert_eq!(w.n_trimmed(), 1);
    }

    #[test]
    fn trim_bounds_are_inclusive() {
        let w = iptw_weights(&[0.05, 0.95, 0.0499, 0.9501], &[true, false, true, false], (0.05, 0.95)).unwrap();
        assert_eq!(w.kept, vec![true, true, false, false]);
    }

    #[test]
    fn empty_after_trim_is_an_error() {
        let t = [true, false];
        let w = iptw_weights(&[0.99, 0.5], &t, (0.05, 0.95)).unwrap();
        assert!(matches!(ate_iptw(&t, &[true, false], &w), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn bad_trim_interval() {
        assert!(iptw_weights(&[0.5], &[true], (0.6, 0.4)).is_err());
    }
}
