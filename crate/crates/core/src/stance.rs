//! Tweet stance prediction, Monte-Carlo stance sampling and per-user
//! polarity aggregation.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{
    calibrate_with_holdout, fit_logistic, BaseModel, CalibratedModel, Classifier, ClassWeights,
    LogisticOptions,
};
use crate::corpus::{Dataset, StanceProbs, Tweet};
use crate::error::{Error, Result};

/// Class order matches the probability vector: InFavor, Against, Neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StanceLabel {
    InFavor,
    Against,
    Neither,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::InFavor, StanceLabel::Against, StanceLabel::Neither];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn polarity(self) -> i64 {
        match self {
            StanceLabel::InFavor => 1,
            StanceLabel::Against => -1,
            StanceLabel::Neither => 0,
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StanceLabel::InFavor => "favor",
            StanceLabel::Against => "against",
            StanceLabel::Neither => "neither",
        })
    }
}

impl FromStr for StanceLabel {
    type Err = Error;

    /// "neutral" is accepted as a synonym of "neither".
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "favor" | "in favor" | "infavor" | "pro" => Ok(StanceLabel::InFavor),
            "against" | "anti" => Ok(StanceLabel::Against),
            "neither" | "neutral" | "none" => Ok(StanceLabel::Neither),
            other => Err(Error::InvalidInput(format!("unknown stance label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pro,
    Anti,
    Neutral,
}

/// How per-tweet polarities combine into a user score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Aggregation {
    /// Plain sum of polarities.
    #[default]
    Sum,
    /// Each polarity weighted by `0.5^(age / half_life_days)`, age measured
    /// back from the end of the period.
    ExponentialDecay { half_life_days: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStance {
    pub polarity_sum: i64,
    /// Equals `polarity_sum` under [`Aggregation::Sum`].
    pub score: f64,
    pub verdict: Verdict,
    /// No tweets fell in the period.
    pub empty: bool,
}

fn verdict_of(score: f64) -> Verdict {
    if score > 0.0 {
        Verdict::Pro
    } else if score < 0.0 {
        Verdict::Anti
    } else {
        Verdict::Neutral
    }
}

pub fn user_polarity(stances: &[StanceLabel]) -> UserStance {
    let sum: i64 = stances.iter().map(|s| s.polarity()).sum();
    UserStance {
        polarity_sum: sum,
        score: sum as f64,
        verdict: verdict_of(sum as f64),
        empty: stances.is_empty(),
    }
}

/// Aggregates dated stances; `period_end` anchors the decay weights.
pub fn user_polarity_dated(
    stances: &[(NaiveDate, StanceLabel)],
    period_end: NaiveDate,
    aggregation: Aggregation,
) -> UserStance {
    let labels: Vec<StanceLabel> = stances.iter().map(|(_, s)| *s).collect();
    let mut out = user_polarity(&labels);
    if let Aggregation::ExponentialDecay { half_life_days } = aggregation {
        out.score = stances
            .iter()
            .map(|(d, s)| {
                let age = (period_end - *d).num_days().max(0) as f64;
                s.polarity() as f64 * 0.5f64.powf(age / half_life_days)
            })
            .sum();
        out.verdict = verdict_of(out.score);
    }
    out
}

/// One sampled stance on one of a user's tweets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StanceObs {
    pub date: NaiveDate,
    pub dataset: Dataset,
    pub label: StanceLabel,
}

/// Pro-JUUL iff the JUUL tweets strictly before `cutoff` aggregate to Pro.
pub fn pro_juul(obs: &[StanceObs], cutoff: NaiveDate, aggregation: Aggregation) -> bool {
    let period: Vec<(NaiveDate, StanceLabel)> = obs
        .iter()
        .filter(|o| o.dataset == Dataset::Juul && o.date < cutoff)
        .map(|o| (o.date, o.label))
        .collect();
    let end = cutoff.pred_opt().unwrap_or(cutoff);
    user_polarity_dated(&period, end, aggregation).verdict == Verdict::Pro
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CannabisStance {
    pub pro: bool,
    /// Earliest InFavor cannabis tweet inside the window.
    pub first_pro_date: Option<NaiveDate>,
}

/// Verdict over cannabis tweets dated in `[cutoff, study_end]`.
pub fn pro_cannabis(
    obs: &[StanceObs],
    cutoff: NaiveDate,
    study_end: NaiveDate,
    aggregation: Aggregation,
) -> CannabisStance {
    let period: Vec<(NaiveDate, StanceLabel)> = obs
        .iter()
        .filter(|o| o.dataset == Dataset::Cannabis && o.date >= cutoff && o.date <= study_end)
        .map(|o| (o.date, o.label))
        .collect();
    let first_pro_date = period
        .iter()
        .filter(|(_, s)| *s == StanceLabel::InFavor)
        .map(|(d, _)| *d)
        .min();
    CannabisStance {
        pro: user_polarity_dated(&period, study_end, aggregation).verdict == Verdict::Pro,
        first_pro_date,
    }
}

/// Categorical draw from a stance probability vector.
pub fn sample_stance<R: Rng + ?Sized>(p: &StanceProbs, rng: &mut R) -> StanceLabel {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return StanceLabel::ALL[i];
        }
    }
    // Rounding left a sliver above the cumulative sum: take the last class
    // with positive mass.
    let last = p.iter().rposition(|&v| v > 0.0).unwrap_or(2);
    StanceLabel::ALL[last]
}

/// Independent RNG stream for one tweet in one simulation, so draws do
/// not depend on iteration order or thread scheduling.
pub fn tweet_rng(master_seed: u64, sim_index: u64, tweet_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(sim_index.to_le_bytes());
    h.update(tweet_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Fills `tweet.stance` from a fitted three-class model.
pub fn predict_stance<C: Classifier + ?Sized>(tweet: &mut Tweet, model: Option<&C>) -> Result<StanceProbs> {
    let model = model.ok_or_else(|| Error::Untrained("no stance classifier".into()))?;
    if model.n_classes() != 3 {
        return Err(Error::InvalidInput(format!(
            "stance model has {} classes, expected 3",
            model.n_classes()
        )));
    }
    let x = tweet
        .embedding
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("tweet {} has no embedding", tweet.id)))?;
    let p = model.predict_proba(x)?;
    let probs = [p[0], p[1], p[2]];
    tweet.stance = Some(probs);
    Ok(probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StanceTrainOptions {
    pub c: f64,
    pub holdout_fraction: f64,
}

impl Default for StanceTrainOptions {
    fn default() -> Self {
        StanceTrainOptions {
            c: 1.0,
            holdout_fraction: 0.2,
        }
    }
}

/// Balanced-class-weight multinomial logistic regression calibrated on a
/// stratified holdout. `y` holds [`StanceLabel::index`] values.
pub fn train_stance_model(
    x: ndarray::ArrayView2<f64>,
    y: &[usize],
    opts: &StanceTrainOptions,
    seed: u64,
) -> Result<CalibratedModel> {
    let lr = LogisticOptions {
        c: opts.c,
        class_weights: ClassWeights::Balanced,
        ..Default::default()
    };
    calibrate_with_holdout(x, y, opts.holdout_fraction, seed, |xt, yt| {
        Ok(BaseModel::Linear(fit_logistic(xt, yt, &lr, None)?))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceAnnotation {
    pub tweet_id: String,
    pub text: String,
    pub label: StanceLabel,
    pub split: Split,
}

#[derive(Deserialize)]
struct AnnotationRow {
    tweet_id: String,
    text: String,
    label: String,
    split: Split,
}

/// Reads `tweet_id,text,label,split` rows.
pub fn load_stance_annotations<R: Read>(reader: R) -> Result<Vec<StanceAnnotation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<AnnotationRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            let label = row.label.parse().map_err(|e: Error| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            Ok(StanceAnnotation {
                tweet_id: row.tweet_id,
                text: row.text,
                label,
                split: row.split,
            })
        })
        .collect()
}
