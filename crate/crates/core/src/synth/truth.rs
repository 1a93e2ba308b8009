use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{leniency, outcome_probability, GeneratorSpec, TierEffects, HORIZON_MAX};
use crate::cohort::Group;
use crate::corpus::StateCode;
use crate::error::{Error, Result};

/// Analytic effects for one (control group, horizon) contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastTruth {
    pub group: Group,
    pub horizon: u32,
    /// Effect averaged over the pooled T and control population.
    pub ate: f64,
    /// Effect averaged over an equal mixture of the T and control
    /// populations, the target of balanced-weight IPTW.
    pub ate_mixture: f64,
    pub att: f64,
    pub atc: f64,
    /// Expected difference in raw outcome means between the two groups.
    pub naive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tau: TierEffects,
    pub gamma: f64,
    pub base_rate: f64,
    /// Population share of each tier.
    pub tier_share: BTreeMap<Group, f64>,
    pub contrasts: Vec<ContrastTruth>,
}

impl GroundTruth {
    pub fn get(&self, group: Group, horizon: u32) -> Option<&ContrastTruth> {
        self.contrasts
            .iter()
            .find(|c| c.group == group && c.horizon == horizon)
    }
}

const GRID_HALF_WIDTH: f64 = 10.0;
const GRID_POINTS: usize = 20_001;

/// Integrates over U on a uniform grid with the trapezoid rule.
fn integrate(f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * GRID_HALF_WIDTH / (GRID_POINTS - 1) as f64;
    let mut s = 0.0;
    for i in 0..GRID_POINTS {
        let u = -GRID_HALF_WIDTH + i as f64 * h;
        let w = if i == 0 || i == GRID_POINTS - 1 { 0.5 } else { 1.0 };
        s += w * f(u);
    }
    s * h
}

fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Effects implied by the outcome model, computed by quadrature over U.
pub fn ground_truth(spec: &GeneratorSpec, tiers: &BTreeMap<Group, Vec<StateCode>>) -> Result<GroundTruth> {
    let groups: Vec<Group> = tiers
        .keys()
        .copied()
        .filter(|&g| spec.tier_mass.get(g) > 0.0)
        .collect();
    if groups.is_empty() {
        return Err(Error::InvalidInput("no tier has positive mass".into()));
    }
    let share = |g: Group, u: f64| -> f64 {
        let w = |h: Group| spec.tier_mass.get(h) * (spec.gamma * u * leniency(h)).exp();
        if !groups.contains(&g) {
            return 0.0;
        }
        w(g) / groups.iter().map(|&h| w(h)).sum::<f64>()
    };
    let tier_share: BTreeMap<Group, f64> = groups
        .iter()
        .map(|&g| (g, integrate(|u| std_normal_pdf(u) * share(g, u))))
        .collect();
    let mut contrasts = Vec::new();
    for g in Group::CONTROLS {
        if !groups.contains(&g) {
            continue;
        }
        for n in 1..=HORIZON_MAX {
            let y1 = |u: f64| outcome_probability(spec, u, Group::T, n);
            let y0 = |u: f64| outcome_probability(spec, u, g, n);
            let mean_over = |tier: Group, f: &dyn Fn(f64) -> f64| {
                integrate(|u| std_normal_pdf(u) * share(tier, u) * f(u)) / tier_share[&tier]
            };
            let effect = |u: f64| y1(u) - y0(u);
            let att = mean_over(Group::T, &effect);
            let atc = mean_over(g, &effect);
            let (pt, pc) = (tier_share[&Group::T], tier_share[&g]);
            contrasts.push(ContrastTruth {
                group: g,
                horizon: n,
                ate: (pt * att + pc * atc) / (pt + pc),
                ate_mixture: 0.5 * (att + atc),
                att,
                atc,
                naive: mean_over(Group::T, &y1) - mean_over(g, &y0),
            });
        }
    }
    Ok(GroundTruth {
        tau: spec.tau.clone(),
        gamma: spec.gamma,
        base_rate: spec.base_rate,
        tier_share,
        contrasts,
    })
}
