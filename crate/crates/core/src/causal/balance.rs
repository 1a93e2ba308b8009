use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional balance threshold drawn in reports.
pub const ASMD_THRESHOLD: f64 = 0.1;

fn weighted_moments(values: &[f64], weights: Option<&[f64]>) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput("balance needs at least two values per group".into()));
    }
    let ones;
    let w = match weights {
        Some(w) if w.len() != values.len() => {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: w.len(),
            })
        }
        Some(w) => w,
        None => {
            ones = vec![1.0; values.len()];
            &ones
        }
    };
    let v1: f64 = w.iter().sum();
    let v2: f64 = w.iter().map(|x| x * x).sum();
    if v1 <= 0.0 {
        return Err(Error::Degenerate("balance weights sum to zero".into()));
    }
    let mean = w.iter().zip(values).map(|(w, x)| w * x).sum::<f64>() / v1;
    let denom = v1 - v2 / v1;
    if denom <= 0.0 {
        return Err(Error::Degenerate("balance weights concentrate on one unit".into()));
    }
    let var = w.iter().zip(values).map(|(w, x)| w * (x - mean).powi(2)).sum::<f64>() / denom;
    Ok((mean, var))
}

/// Absolute standardized mean difference with a pooled standard
/// deviation `sqrt((var_t + var_c) / 2)`. Weighted variances use the
/// unbiased reliability-weight form, which reduces to the `n - 1` sample
/// variance when weights are absent. Zero pooled spread gives 0 for equal
/// means and +inf otherwise.
pub fn asmd(treated: &[f64], control: &[f64], wt: Option<&[f64]>, wc: Option<&[f64]>) -> Result<f64> {
    let (mt, vt) = weighted_moments(treated, wt)?;
    let (mc, vc) = weighted_moments(control, wc)?;
    let diff = (mt - mc).abs();
    let sd = ((vt + vc) / 2.0).sqrt();
    if sd == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / sd)
}

/// ASMD for each covariate column.
pub fn asmd_per_dim(
    treated: &[&[f64]],
    control: &[&[f64]],
    wt: Option<&[f64]>,
    wc: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let (Some(first), false) = (treated.first(), control.is_empty()) else {
        return Err(Error::InvalidInput("balance needs units in both groups".into()));
    };
    (0..first.len())
        .map(|j| {
            let t: Vec<f64> = treated.iter().map(|r| r[j]).collect();
            let c: Vec<f64> = control.iter().map(|r| r[j]).collect();
            asmd(&t, &c, wt, wc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub method: String,
    pub group: String,
    pub asmd_before: Vec<f64>,
    pub asmd_after: Vec<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(asmd(&a, &a, None, None).unwrap(), 0.0);
    }

    #[test]
    fn unit_variance_unit_shift() {
        let h = 2f64.sqrt() / 2.0;
        let t = [1.0 - h, 1.0 + h];
        let c = [-h, h];
        assert!((asmd(&t, &c, None, None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spread() {
        assert_eq!(asmd(&[1.0, 1.0], &[1.0, 1.0], None, None).unwrap(), 0.0);
        assert!(asmd(&[1.0, 1.0], &[2.0, 2.0], None, None).unwrap().is_infinite());
        assert!(asmd(&[1.0], &[2.0, 2.0], None, None).is_err());
    }

    #[test]
    fn integer_weights_match_replication() {
        let t = [0.0, 1.0, 3.0];
        let c = [2.0, 5.0, 4.0];
        let wt = [1.0, 1.0, 1.0];
        let wc = [1.0, 1.0, 1.0];
        let a = asmd(&t, &c, Some(&wt), Some(&wc)).unwrap();
        assert!((a - asmd(&t, &c, None, None).unwrap()).abs() < 1e-15);
        // Uniform rescaling of weights leaves the statistic unchanged.
        let b = asmd(&t, &c, Some(&[3.0; 3]), Some(&[0.5; 3])).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
