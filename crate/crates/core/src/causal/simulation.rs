use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    asmd_per_dim, ate_iptw, ate_matched, fit_propensity, iptw_weights, nnm_match, psm_match,
    summarize_ci, CiMode, Method, PropensityKind,
};
use crate::classify::{rows_to_array, GbmOptions};
use crate::cohort::{assign_groups, select_population, CausalUnit, Group, PolicyTable, UserDraw};
use crate::corpus::{Dataset, StanceProbs, StateCode, Tweet};
use crate::error::{Error, Result};
use crate::stance::{pro_cannabis, pro_juul, sample_stance, tweet_rng, Aggregation, StanceObs};
use crate::vector::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTweet {
    pub id: String,
    pub date: NaiveDate,
    pub dataset: Dataset,
    pub is_retweet: bool,
    pub stance: StanceProbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyUser {
    pub user_id: String,
    pub state: Option<StateCode>,
    /// Mean embedding of the user's tweets dated before the cutoff.
    pub covariates: Vec<f64>,
    pub first_cannabis: Option<NaiveDate>,
    pub tweets: Vec<StudyTweet>,
}

/// Users and stance-scored tweets prepared for one treatment cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCorpus {
    pub legalization_date: NaiveDate,
    pub users: Vec<StudyUser>,
}

impl StudyCorpus {
    /// Groups stance-scored, embedded tweets by user. Users with no tweet
    /// before `legalization_date` have no pre-treatment covariates and are
    /// left out. With `include_retweets = false` retweets are dropped first.
    pub fn from_tweets(tweets: &[Tweet], legalization_date: NaiveDate, include_retweets: bool) -> Result<Self> {
        let mut by_user: BTreeMap<&str, Vec<&Tweet>> = BTreeMap::new();
        for t in tweets.iter().filter(|t| include_retweets || !t.is_retweet) {
            by_user.entry(t.user_id.as_str()).or_default().push(t);
        }
        let mut users = Vec::with_capacity(by_user.len());
        for (user_id, owned) in by_user {
            let mut pre = Vec::new();
            for t in &owned {
                if t.date < legalization_date {
                    let x = t
                        .embedding
                        .as_deref()
                        .ok_or_else(|| Error::InvalidInput(format!("tweet {} has no embedding", t.id)))?;
                    pre.push(x);
                }
            }
            let Some(covariates) = mean(pre) else { continue };
            let mut study_tweets = Vec::with_capacity(owned.len());
            for t in &owned {
                t.check_stance()?;
                let stance = t
                    .stance
                    .ok_or_else(|| Error::InvalidInput(format!("tweet {} has no stance probabilities", t.id)))?;
                study_tweets.push(StudyTweet {
                    id: t.id.clone(),
                    date: t.date,
                    dataset: t.dataset,
                    is_retweet: t.is_retweet,
                    stance,
                });
            }
            study_tweets.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
            users.push(StudyUser {
                user_id: user_id.to_owned(),
                state: Some(owned[0].state.clone()),
                covariates,
                first_cannabis: owned
                    .iter()
                    .filter(|t| t.dataset == Dataset::Cannabis)
                    .map(|t| t.date)
                    .min(),
                tweets: study_tweets,
            });
        }
        Ok(StudyCorpus {
            legalization_date,
            users,
        })
    }

    pub fn n_tweets(&self) -> usize {
        self.users.iter().map(|u| u.tweets.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub treatment_state: StateCode,
    pub legalization_date: NaiveDate,
    pub study_end: NaiveDate,
    pub horizons: Vec<u32>,
    pub methods: Vec<Method>,
    pub trim: (f64, f64),
    pub lr_c: f64,
    pub gbm: GbmOptions,
    pub aggregation: Aggregation,
    pub master_seed: u64,
    pub n_sims: usize,
    pub ci_mode: CiMode,
    /// Cells whose mean treated or control count falls below this are
    /// flagged as having insufficient population.
    pub min_group_size: usize,
}

impl EstimationConfig {
    pub fn new(treatment_state: StateCode, legalization_date: NaiveDate) -> Self {
        EstimationConfig {
            treatment_state,
            legalization_date,
            study_end: NaiveDate::from_ymd_opt(2018, 12, 31).expect("valid date"),
            horizons: (1..=6).collect(),
            methods: Method::ALL.to_vec(),
            trim: (0.05, 0.95),
            lr_c: 1.0,
            gbm: GbmOptions::default(),
            aggregation: Aggregation::Sum,
            master_seed: 0,
            n_sims: 200,
            ci_mode: CiMode::PaperLiteral,
            min_group_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub method: Method,
    pub group: Group,
    pub horizon: u32,
    pub ate: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
    pub n_trimmed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBalance {
    pub method: Method,
    pub group: Group,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub sim_index: usize,
    pub n_eligible: usize,
    pub group_sizes: BTreeMap<Group, usize>,
    pub cells: Vec<SimCell>,
    pub balance: Vec<SimBalance>,
}

impl SimResult {
    pub fn cell(&self, method: Method, group: Group, horizon: u32) -> Option<&SimCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.group == group && c.horizon == horizon)
    }
}

/// Samples every tweet's stance for one simulation and derives the
/// per-user quantities cohort selection needs.
pub fn draw_users(corpus: &StudyCorpus, cfg: &EstimationConfig, sim_index: usize) -> Vec<UserDraw> {
    corpus
        .users
        .iter()
        .map(|u| {
            let obs: Vec<StanceObs> = u
                .tweets
                .iter()
                .map(|t| {
                    let mut rng = tweet_rng(cfg.master_seed, sim_index as u64, &t.id);
                    StanceObs {
                        date: t.date,
                        dataset: t.dataset,
                        label: sample_stance(&t.stance, &mut rng),
                    }
                })
                .collect();
            let cannabis = pro_cannabis(&obs, cfg.legalization_date, cfg.study_end, cfg.aggregation);
            UserDraw {
                user_id: u.user_id.clone(),
                state: u.state.clone(),
                covariates: u.covariates.clone(),
                pro_juul: pro_juul(&obs, cfg.legalization_date, cfg.aggregation),
                first_cannabis: u.first_cannabis,
                first_pro_date: cannabis.first_pro_date,
            }
        })
        .collect()
}

/// One full pass: stance draw, cohort, propensity fits and estimates for
/// every configured method, control group and horizon. Cells that cannot
/// be estimated are left with `ate = None`.
pub fn run_simulation(
    corpus: &StudyCorpus,
    cfg: &EstimationConfig,
    table: &PolicyTable,
    sim_index: usize,
) -> Result<SimResult> {
    let draws = draw_users(corpus, cfg, sim_index);
    let eligible = select_population(&draws, cfg.legalization_date);
    let units = assign_groups(&eligible, &cfg.treatment_state, cfg.legalization_date, table, &cfg.horizons)?;
    let mut group_sizes = BTreeMap::new();
    for u in &units {
        *group_sizes.entry(u.group).or_insert(0) += 1;
    }
    let mut cells = Vec::new();
    let mut balance = Vec::new();
    let treated: Vec<&CausalUnit> = units.iter().filter(|u| u.treated).collect();
    for group in Group::CONTROLS {
        let controls: Vec<&CausalUnit> = units.iter().filter(|u| u.group == group).collect();
        estimate_group(cfg, group, &treated, &controls, &mut cells, &mut balance);
    }
    Ok(SimResult {
        sim_index,
        n_eligible: eligible.len(),
        group_sizes,
        cells,
        balance,
    })
}

fn estimate_group(
    cfg: &EstimationConfig,
    group: Group,
    treated: &[&CausalUnit],
    controls: &[&CausalUnit],
    cells: &mut Vec<SimCell>,
    balance: &mut Vec<SimBalance>,
) {
    let (nt, nc) = (treated.len(), controls.len());
    let push_missing = |cells: &mut Vec<SimCell>, method: Method| {
        for &h in &cfg.horizons {
            cells.push(SimCell {
                method,
                group,
                horizon: h,
                ate: None,
                n_treated: nt,
                n_control: nc,
                n_trimmed: 0,
            });
        }
    };
    if nt == 0 || nc == 0 {
        for &m in &cfg.methods {
            push_missing(cells, m);
        }
        return;
    }
    let xt: Vec<&[f64]> = treated.iter().map(|u| u.covariates.as_slice()).collect();
    let xc: Vec<&[f64]> = controls.iter().map(|u| u.covariates.as_slice()).collect();
    let before = asmd_per_dim(&xt, &xc, None, None).ok();

    let mut scores: BTreeMap<PropensityKind, Option<Vec<f64>>> = BTreeMap::new();
    let flags: Vec<bool> = (0..nt + nc).map(|i| i < nt).collect();
    let rows: Vec<Vec<f64>> = xt.iter().chain(&xc).map(|r| r.to_vec()).collect();
    for kind in cfg.methods.iter().filter_map(|m| m.propensity()) {
        scores.entry(kind).or_insert_with(|| {
            let x = rows_to_array(&rows).ok()?;
            match fit_propensity(x.view(), &flags, kind, cfg.lr_c, &cfg.gbm) {
                Ok(e) => Some(e),
                Err(err) => {
                    tracing::warn!(%group, kind = kind.as_str(), %err, "propensity fit failed");
                    None
                }
            }
        });
    }

    for &method in &cfg.methods {
        let outcome = |u: &CausalUnit, k: usize| u.outcomes[k];
        match method {
            Method::IptwLr | Method::IptwGbm => {
                let kind = method.propensity().expect("IPTW uses a propensity model");
                let Some(Some(e)) = scores.get(&kind) else {
                    push_missing(cells, method);
                    continue;
                };
                let Ok(w) = iptw_weights(e, &flags, cfg.trim) else {
                    push_missing(cells, method);
                    continue;
                };
                for (k, &h) in cfg.horizons.iter().enumerate() {
                    let y: Vec<bool> = treated.iter().chain(controls).map(|u| outcome(u, k)).collect();
                    cells.push(SimCell {
                        method,
                        group,
                        horizon: h,
                        ate: ate_iptw(&flags, &y, &w).ok(),
                        n_treated: nt,
                        n_control: nc,
                        n_trimmed: w.n_trimmed(),
                    });
                }
                if let Some(before) = &before {
                    let kept_t: Vec<usize> = (0..nt).filter(|&i| w.kept[i]).collect();
                    let kept_c: Vec<usize> = (nt..nt + nc).filter(|&i| w.kept[i]).collect();
                    let rt: Vec<&[f64]> = kept_t.iter().map(|&i| rows[i].as_slice()).collect();
                    let rc: Vec<&[f64]> = kept_c.iter().map(|&i| rows[i].as_slice()).collect();
                    let wt: Vec<f64> = kept_t.iter().map(|&i| w.weights[i]).collect();
                    let wc: Vec<f64> = kept_c.iter().map(|&i| w.weights[i]).collect();
                    if let Ok(after) = asmd_per_dim(&rt, &rc, Some(&wt), Some(&wc)) {
                        balance.push(SimBalance {
                            method,
                            group,
                            before: before.clone(),
                            after,
                        });
                    }
                }
            }
            Method::PsmLr | Method::PsmGbm | Method::Nnm => {
                let matched = if method == Method::Nnm {
                    nnm_match(&xt, &xc)
                } else {
                    let kind = method.propensity().expect("PSM uses a propensity model");
                    let Some(Some(e)) = scores.get(&kind) else {
                        push_missing(cells, method);
                        continue;
                    };
                    psm_match(&e[..nt], &e[nt..], method.as_str())
                };
                let Ok(matched) = matched else {
                    push_missing(cells, method);
                    continue;
                };
                for (k, &h) in cfg.horizons.iter().enumerate() {
                    let yt: Vec<bool> = treated.iter().map(|u| outcome(u, k)).collect();
                    let yc: Vec<bool> = controls.iter().map(|u| outcome(u, k)).collect();
                    cells.push(SimCell {
                        method,
                        group,
                        horizon: h,
                        ate: ate_matched(&matched, &yt, &yc).ok(),
                        n_treated: nt,
                        n_control: nc,
                        n_trimmed: 0,
                    });
                }
                if let Some(before) = &before {
                    let mc: Vec<&[f64]> = matched.controls().map(|j| xc[j]).collect();
                    if let Ok(after) = asmd_per_dim(&xt, &mc, None, None) {
                        balance.push(SimBalance {
                            method,
                            group,
                            before: before.clone(),
                            after,
                        });
                    }
                }
            }
        }
    }
}

/// Runs `cfg.n_sims` simulations in parallel; results are in index order.
pub fn run_simulations(corpus: &StudyCorpus, cfg: &EstimationConfig, table: &PolicyTable) -> Result<Vec<SimResult>> {
    if cfg.n_sims == 0 {
        return Err(Error::InvalidInput("n_sims must be at least 1".into()));
    }
    if corpus.legalization_date != cfg.legalization_date {
        return Err(Error::InvalidInput(
            "study corpus was prepared for a different legalization date".into(),
        ));
    }
    (0..cfg.n_sims)
        .into_par_iter()
        .map(|i| run_simulation(corpus, cfg, table, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteRow {
    pub method: Method,
    pub group: Group,
    pub horizon: u32,
    pub ate_mean: Option<f64>,
    pub ate_sd: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    /// Simulations in which the cell could be estimated.
    pub n_available: usize,
    pub n_treated: f64,
    pub n_control: f64,
    pub n_trimmed: f64,
    pub insufficient_population: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub method: Method,
    pub group: Group,
    pub dim: usize,
    pub asmd_before: f64,
    pub asmd_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n_sims: usize,
    pub ci_mode: CiMode,
    pub mean_eligible: f64,
    pub ate: Vec<AteRow>,
    pub balance: Vec<BalanceRow>,
}

impl EstimateReport {
    pub fn row(&self, method: Method, group: Group, horizon: u32) -> Option<&AteRow> {
        self.ate
            .iter()
            .find(|r| r.method == method && r.group == group && r.horizon == horizon)
    }

    /// Per-dimension balance rows of one (method, group) cell.
    pub fn balance_of(&self, method: Method, group: Group) -> Vec<&BalanceRow> {
        self.balance
            .iter()
            .filter(|r| r.method == method && r.group == group)
            .collect()
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Aggregates per-simulation cells into interval summaries and mean
/// balance per dimension.
pub fn summarize_simulations(results: &[SimResult], cfg: &EstimationConfig) -> EstimateReport {
    let mut ate = Vec::new();
    for &method in &cfg.methods {
        for group in Group::CONTROLS {
            for &h in &cfg.horizons {
                let cells: Vec<&SimCell> = results.iter().filter_map(|r| r.cell(method, group, h)).collect();
                let values: Vec<f64> = cells.iter().filter_map(|c| c.ate).collect();
                let (mut ate_mean, mut ate_sd, mut ci_lo, mut ci_hi) = (None, None, None, None);
                if values.len() >= 2 {
                    let s = summarize_ci(&values, cfg.ci_mode).expect("two or more values");
                    ate_mean = Some(s.mean);
                    ate_sd = Some(s.sd);
                    ci_lo = Some(s.ci_lo);
                    ci_hi = Some(s.ci_hi);
                } else if let Some(&v) = values.first() {
                    ate_mean = Some(v);
                }
                let n_treated = mean_of(cells.iter().map(|c| c.n_treated as f64));
                let n_control = mean_of(cells.iter().map(|c| c.n_control as f64));
                let min = cfg.min_group_size as f64;
                ate.push(AteRow {
                    method,
                    group,
                    horizon: h,
                    ate_mean,
                    ate_sd,
                    ci_lo,
                    ci_hi,
                    n_available: values.len(),
                    n_treated,
                    n_control,
                    n_trimmed: mean_of(cells.iter().map(|c| c.n_trimmed as f64)),
                    insufficient_population: values.is_empty() || n_treated < min || n_control < min,
                });
            }
        }
    }
    let mut balance = Vec::new();
    for &method in &cfg.methods {
        for group in Group::CONTROLS {
            let reports: Vec<&SimBalance> = results
                .iter()
                .flat_map(|r| r.balance.iter().filter(|b| b.method == method && b.group == group))
                .collect();
            let Some(first) = reports.first() else { continue };
            for dim in 0..first.before.len() {
                balance.push(BalanceRow {
                    method,
                    group,
                    dim,
                    asmd_before: mean_of(reports.iter().map(|b| b.before[dim])),
                    asmd_after: mean_of(reports.iter().map(|b| b.after[dim])),
                });
            }
        }
    }
    EstimateReport {
        n_sims: results.len(),
        ci_mode: cfg.ci_mode,
        mean_eligible: mean_of(results.iter().map(|r| r.n_eligible as f64)),
        ate,
        balance,
    }
}

/// Convenience wrapper: run every simulation and summarize.
pub fn estimate(corpus: &StudyCorpus, cfg: &EstimationConfig, table: &PolicyTable) -> Result<EstimateReport> {
    let results = run_simulations(corpus, cfg, table)?;
    Ok(summarize_simulations(&results, cfg))
}
