//! Synthetic corpora with controlled confounding and analytically known
//! treatment effects.

mod truth;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::classify::sigmoid;
use crate::cohort::{add_months, Group, Policy, PolicyTable};
use crate::corpus::{Dataset, StanceProbs, StateCode, Tweet, TweetRecord};
use crate::error::{Error, Result};
use crate::stance::StanceLabel;

pub use truth::{ground_truth, ContrastTruth, GroundTruth};

/// Relative share of users in each tier before the confounding tilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierMass {
    pub t: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl TierMass {
    pub fn get(&self, g: Group) -> f64 {
        match g {
            Group::T => self.t,
            Group::C1 => self.c1,
            Group::C2 => self.c2,
            Group::C3 => self.c3,
            Group::C4 => self.c4,
        }
    }
}

/// Effect of the treatment state's policy on the logit of the outcome,
/// one value per control-group contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierEffects {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl TierEffects {
    pub fn uniform(tau: f64) -> Self {
        TierEffects {
            c1: tau,
            c2: tau,
            c3: tau,
            c4: tau,
        }
    }

    pub fn get(&self, g: Group) -> f64 {
        match g {
            Group::T => 0.0,
            Group::C1 => self.c1,
            Group::C2 => self.c2,
            Group::C3 => self.c3,
            Group::C4 => self.c4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_users: usize,
    pub seed: u64,
    pub treatment_state: StateCode,
    pub legalization_date: NaiveDate,
    pub juul_start: NaiveDate,
    pub study_end: NaiveDate,
    pub tier_mass: TierMass,
    pub tau: TierEffects,
    /// Latent interest coefficient in both state choice and outcome.
    pub gamma: f64,
    /// Probability of a favorable cannabis post within six months for a
    /// treated user at U = 0.
    pub base_rate: f64,
    pub embedding_dim: usize,
    pub loading: f64,
    pub embedding_noise: f64,
    /// Mixing weight toward uniform in JUUL stance probabilities.
    pub stance_noise: f64,
    /// Users have `2 + Poisson(mean)` JUUL posts.
    pub juul_posts_mean: f64,
    pub juul_stance: StanceProbs,
    pub pre_cannabis_rate: f64,
    pub retweet_rate: f64,
    pub bot_rate: f64,
    pub promo_rate: f64,
    pub foreign_rate: f64,
    pub annotations_per_dataset: usize,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_users: 2000,
            seed: 0,
            treatment_state: StateCode::new("CA").expect("valid code"),
            legalization_date: ymd(2018, 1, 1),
            juul_start: ymd(2016, 1, 1),
            study_end: ymd(2018, 12, 31),
            tier_mass: TierMass {
                t: 0.3,
                c1: 0.3,
                c2: 0.1,
                c3: 0.15,
                c4: 0.15,
            },
            tau: TierEffects::uniform(0.15),
            gamma: 1.0,
            base_rate: 0.3,
            embedding_dim: 10,
            loading: 1.0,
            embedding_noise: 0.5,
            stance_noise: 0.3,
            juul_posts_mean: 3.0,
            juul_stance: [0.8, 0.1, 0.1],
            pre_cannabis_rate: 0.1,
            retweet_rate: 0.15,
            bot_rate: 0.02,
            promo_rate: 0.05,
            foreign_rate: 0.03,
            annotations_per_dataset: 300,
        }
    }
}

/// Policy leniency used to tilt state choice.
pub fn leniency(g: Group) -> f64 {
    match g {
        Group::T | Group::C4 => 1.0,
        Group::C3 => 2.0 / 3.0,
        Group::C2 => 1.0 / 3.0,
        Group::C1 => 0.0,
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// P(favorable post by month `n`) for latent interest `u` in a tier.
pub fn outcome_probability(spec: &GeneratorSpec, u: f64, group: Group, n: u32) -> f64 {
    let base = logit(spec.base_rate * f64::from(n) / 6.0);
    sigmoid(base + spec.gamma * u - spec.tau.get(group))
}

pub(crate) const HORIZON_MAX: u32 = 6;

impl GeneratorSpec {
    /// Tier states at the legalization date, T first.
    pub fn tiers(&self, table: &PolicyTable) -> Result<BTreeMap<Group, Vec<StateCode>>> {
        let mut tiers: BTreeMap<Group, Vec<StateCode>> = BTreeMap::new();
        for s in table.states() {
            let g = if *s == self.treatment_state {
                Group::T
            } else {
                Group::for_control_policy(table.policy_at(s, self.legalization_date)?)
            };
            tiers.entry(g).or_default().push(s.clone());
        }
        if !tiers.contains_key(&Group::T) {
            return Err(Error::InvalidInput(format!(
                "treatment state {} is not in the policy table",
                self.treatment_state
            )));
        }
        Ok(tiers)
    }

    pub fn validate(&self, table: &PolicyTable) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        for g in Group::CONTROLS {
            let t = self.tau.get(g);
            if !(-1.0..=1.0).contains(&t) {
                return bad(format!("tau for {g} must lie in [-1, 1], got {t}"));
            }
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return bad(format!("base_rate must lie in (0, 1), got {}", self.base_rate));
        }
        if self.embedding_dim < 4 {
            return bad("embedding_dim must be at least 4".into());
        }
        if !(0.0..=1.0).contains(&self.stance_noise) {
            return bad("stance_noise must lie in [0, 1]".into());
        }
        let sum: f64 = self.juul_stance.iter().sum();
        if self.juul_stance.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return bad("juul_stance must be a probability vector".into());
        }
        for (name, r) in [
            ("pre_cannabis_rate", self.pre_cannabis_rate),
            ("retweet_rate", self.retweet_rate),
            ("bot_rate", self.bot_rate),
            ("promo_rate", self.promo_rate),
            ("foreign_rate", self.foreign_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.loading.is_finite() && self.embedding_noise >= 0.0 && self.juul_posts_mean >= 0.0) {
            return bad("loading, embedding_noise and juul_posts_mean must be finite and non-negative".into());
        }
        if self.juul_start >= self.legalization_date {
            return bad("juul_start must precede the legalization date".into());
        }
        if add_months(self.legalization_date, HORIZON_MAX) > self.study_end {
            return bad("study window ends before the last horizon".into());
        }
        let tiers = self.tiers(table)?;
        if table.policy_at(&self.treatment_state, self.legalization_date)? != Policy::Recreational {
            return bad(format!(
                "{} is not recreational on {}",
                self.treatment_state, self.legalization_date
            ));
        }
        let mut total = 0.0;
        for g in [Group::T, Group::C1, Group::C2, Group::C3, Group::C4] {
            let m = self.tier_mass.get(g);
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("tier mass for {g} must be non-negative"));
            }
            if m > 0.0 && !tiers.contains_key(&g) {
                return bad(format!("tier {g} has positive mass but no states"));
            }
            total += m;
        }
        if self.tier_mass.t <= 0.0 || total <= self.tier_mass.t {
            return bad("treatment and at least one control tier need positive mass".into());
        }
        Ok(())
    }
}

/// Generated corpus. `tweets` holds the study users' posts with their true
/// stance probabilities and embeddings; `records` is everything the raw
/// input file contains, including bots, brand accounts and foreign users.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: GeneratorSpec,
    pub policy: PolicyTable,
    pub tweets: Vec<Tweet>,
    pub records: Vec<TweetRecord>,
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub blocklist: Vec<String>,
    pub scores: Vec<(String, f64)>,
    pub annotations: Vec<(String, String, StanceLabel, bool)>,
    /// Latent interest and tier of each study user.
    pub latent: BTreeMap<String, (f64, Group)>,
    pub truth: GroundTruth,
}

const STRONG: [&str; 6] = ["amazing", "awesome", "adore", "beautiful", "best", "addicted"];
const PRONOUNS: [&str; 4] = ["i", "my", "we", "me"];
const CANNABIS_WORDS: [&str; 4] = ["weed", "cannabis", "marijuana", "thc"];

struct Builder<'a> {
    spec: &'a GeneratorSpec,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    out: SynthCorpus,
    next_tweet: usize,
    annotation_counts: BTreeMap<Dataset, usize>,
}

impl Builder<'_> {
    fn embedding(&mut self, u: f64, promo: bool, stance: StanceLabel) -> Vec<f64> {
        let n = self.spec.embedding_dim;
        let mut x = Vec::with_capacity(n);
        for _ in 0..n - 3 {
            x.push(self.spec.loading * u + self.noise.sample(&mut self.rng));
        }
        x.push(if promo { 3.0 } else { 0.0 } + self.noise.sample(&mut self.rng));
        let (f, a) = match stance {
            StanceLabel::InFavor => (1.5, 0.0),
            StanceLabel::Against => (0.0, 1.5),
            StanceLabel::Neither => (0.0, 0.0),
        };
        x.push(f + self.noise.sample(&mut self.rng));
        x.push(a + self.noise.sample(&mut self.rng));
        x
    }

    fn date_between(&mut self, start: NaiveDate, end_exclusive: NaiveDate) -> NaiveDate {
        let span = (end_exclusive - start).num_days().max(1);
        start + Duration::days(self.rng.gen_range(0..span))
    }

    fn personal_text(&mut self, keyword: &str, token: &str) -> String {
        let mut words = Vec::new();
        if self.rng.gen_bool(0.85) {
            words.push(PRONOUNS[self.rng.gen_range(0..PRONOUNS.len())].to_string());
        }
        for _ in 0..self.rng.gen_range(1..=3) {
            words.push(STRONG[self.rng.gen_range(0..STRONG.len())].to_string());
        }
        words.push(keyword.to_string());
        words.push(token.to_string());
        if self.rng.gen_bool(0.08) {
            words.push(format!("https://pics.example.com/{}", self.rng.gen_range(0..10_000)));
        }
        words.join(" ")
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        user_id: &str,
        location: &str,
        lang: &str,
        state: Option<&StateCode>,
        date: NaiveDate,
        dataset: Dataset,
        text_of: impl FnOnce(&mut Self, &str) -> String,
        x: Vec<f64>,
        is_retweet: bool,
        stance: Option<StanceProbs>,
        external: (f64, f64),
    ) -> String {
        let id = format!("t{:07}", self.next_tweet);
        let token = format!("w{:07}", self.next_tweet);
        self.next_tweet += 1;
        let mut text = text_of(self, &token);
        if is_retweet {
            text = format!("RT @friend{}: {text}", self.rng.gen_range(0..100));
        }
        if self.rng.gen_bool(0.7) {
            let s = self.rng.gen_range(external.0..external.1);
            self.out.scores.push((id.clone(), s));
        }
        self.out.records.push(TweetRecord {
            id: id.clone(),
            user_id: user_id.to_string(),
            created_at: date.format("%Y-%m-%d").to_string(),
            text: text.clone(),
            lang: lang.to_string(),
            user_location: Some(location.to_string()),
            is_retweet,
            dataset: Some(dataset),
        });
        self.out.embeddings.push((token, x.clone()));
        if let (Some(state), Some(p)) = (state, stance) {
            self.out.tweets.push(Tweet {
                id: id.clone(),
                user_id: user_id.to_string(),
                date,
                text,
                dataset,
                is_retweet,
                lang: lang.to_string(),
                location: location.to_string(),
                state: state.clone(),
                embedding: Some(x),
                p_personal: None,
                stance: Some(p),
            });
        }
        id
    }

    fn sample_label(&mut self, p: &StanceProbs) -> StanceLabel {
        let i = WeightedIndex::new(p).expect("valid simplex").sample(&mut self.rng);
        StanceLabel::from_index(i).expect("three classes")
    }

    /// One study user: JUUL posts before the cutoff and a cannabis post in
    /// each month after it.
    fn study_user(&mut self, idx: usize, u: f64, group: Group, state: &StateCode, bot: bool) {
        let spec = self.spec;
        let user_id = if bot { format!("bot{idx:05}") } else { format!("u{idx:05}") };
        let location = format!("Hometown, {state}");
        let keep = (!bot).then_some(state);
        let k = 2 + Poisson::new(spec.juul_posts_mean.max(1e-9))
            .expect("positive mean")
            .sample(&mut self.rng) as usize;
        let nu = spec.stance_noise;
        for _ in 0..k {
            let label = self.sample_label(&spec.juul_stance);
            let mut p = [nu / 3.0; 3];
            p[label.index()] += 1.0 - nu;
            let date = self.date_between(spec.juul_start, spec.legalization_date);
            let x = self.embedding(u, false, label);
            let rt = self.rng.gen_bool(spec.retweet_rate);
            let id = self.emit(
                &user_id,
                &location,
                "en",
                keep,
                date,
                Dataset::Juul,
                |b, tok| b.personal_text("juul", tok),
                x,
                rt,
                Some(p),
                (0.2, 1.0),
            );
            if !bot {
                self.annotate(id, Dataset::Juul, label);
            }
        }
        if self.rng.gen_bool(spec.pre_cannabis_rate) {
            let date = self.date_between(spec.juul_start, spec.legalization_date);
            let p = [1.0 / 3.0; 3];
            let label = self.sample_label(&p);
            let x = self.embedding(u, false, label);
            let word = CANNABIS_WORDS[self.rng.gen_range(0..CANNABIS_WORDS.len())];
            self.emit(
                &user_id,
                &location,
                "en",
                keep,
                date,
                Dataset::Cannabis,
                |b, tok| b.personal_text(word, tok),
                x,
                false,
                Some(p),
                (0.2, 1.0),
            );
        }
        let mut prev = 0.0;
        for m in 1..=HORIZON_MAX {
            let pm = outcome_probability(spec, u, group, m);
            // Hazard of a first favorable post in month m.
            let q = (1.0 - (1.0 - pm) / (1.0 - prev)).clamp(0.0, 1.0);
            prev = pm;
            let p = [q, (1.0 - q) / 2.0, (1.0 - q) / 2.0];
            let label = self.sample_label(&p);
            let date = add_months(spec.legalization_date, m - 1) + Duration::days(7);
            let x = self.embedding(u, false, label);
            let word = CANNABIS_WORDS[self.rng.gen_range(0..CANNABIS_WORDS.len())];
            let id = self.emit(
                &user_id,
                &location,
                "en",
                keep,
                date,
                Dataset::Cannabis,
                |b, tok| b.personal_text(word, tok),
                x,
                false,
                Some(p),
                (0.2, 1.0),
            );
            if !bot {
                self.annotate(id, Dataset::Cannabis, label);
            }
        }
        if !bot {
            self.out.latent.insert(user_id, (u, group));
        } else {
            self.out.blocklist.push(user_id);
        }
    }

    fn annotate(&mut self, id: String, dataset: Dataset, label: StanceLabel) {
        // Users arrive in random order, so the first posts are a fair sample.
        let count = self.annotation_counts.entry(dataset).or_insert(0);
        if *count >= self.spec.annotations_per_dataset {
            return;
        }
        *count += 1;
        let text = self.out.tweets.last().expect("study post just emitted").text.clone();
        let train = self.rng.gen_bool(0.8);
        self.out.annotations.push((id, text, label, train));
    }
}

impl Builder<'_> {
    fn promo_user(&mut self, idx: usize, states: &[StateCode]) {
        let spec = self.spec;
        let user_id = format!("brand{idx:04}");
        let state = &states[self.rng.gen_range(0..states.len())];
        let location = format!("Hometown, {state}");
        for _ in 0..2 + self.rng.gen_range(0..4) {
            let date = self.date_between(spec.juul_start, spec.study_end);
            let u = self.noise.sample(&mut self.rng);
            let x = self.embedding(u, true, StanceLabel::Neither);
            let n = self.rng.gen_range(0..10_000);
            let lead = if self.rng.gen_bool(0.15) { "we have" } else { "get" };
            let (dataset, text) = if date < spec.legalization_date || self.rng.gen_bool(0.5) {
                (Dataset::Juul, format!("{lead} new juul pods in stock https://store.example.com/p/{n}"))
            } else {
                (Dataset::Cannabis, format!("cbd and cannabis deals today https://dispensary.example.com/d/{n}"))
            };
            self.emit(
                &user_id,
                &location,
                "en",
                None,
                date,
                dataset,
                |_, tok| format!("{text} {tok}"),
                x,
                false,
                None,
                (0.0, 0.3),
            );
        }
    }

    fn foreign_user(&mut self, idx: usize, states: &[StateCode]) {
        let spec = self.spec;
        let user_id = format!("x{idx:05}");
        let (location, lang) = if self.rng.gen_bool(0.5) {
            ("London, England".to_string(), "en")
        } else {
            let state = &states[self.rng.gen_range(0..states.len())];
            (format!("Hometown, {state}"), "es")
        };
        for _ in 0..2 {
            let date = self.date_between(spec.juul_start, spec.legalization_date);
            let u = self.noise.sample(&mut self.rng);
            let x = self.embedding(u, false, StanceLabel::InFavor);
            self.emit(
                &user_id,
                &location,
                lang,
                None,
                date,
                Dataset::Juul,
                |b, tok| b.personal_text("juul", tok),
                x,
                false,
                None,
                (0.2, 1.0),
            );
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<SynthCorpus> {
    generate_with_policy(spec, PolicyTable::builtin())
}

/// Builds a corpus: latent interest U ~ N(0, 1) tilts the choice of
/// policy tier and raises both the covariates and the outcome logit.
pub fn generate_with_policy(spec: &GeneratorSpec, policy: PolicyTable) -> Result<SynthCorpus> {
    spec.validate(&policy)?;
    let tiers = spec.tiers(&policy)?;
    let truth = ground_truth(spec, &tiers)?;
    let groups: Vec<Group> = tiers
        .keys()
        .copied()
        .filter(|&g| spec.tier_mass.get(g) > 0.0)
        .collect();
    let all_states: Vec<StateCode> = policy.states().cloned().collect();
    let mut b = Builder {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        noise: Normal::new(0.0, spec.embedding_noise).expect("non-negative sd"),
        out: SynthCorpus {
            spec: spec.clone(),
            policy,
            tweets: Vec::new(),
            records: Vec::new(),
            embeddings: Vec::new(),
            blocklist: Vec::new(),
            scores: Vec::new(),
            annotations: Vec::new(),
            latent: BTreeMap::new(),
            truth,
        },
        next_tweet: 0,
        annotation_counts: BTreeMap::new(),
    };
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    for i in 0..spec.n_users {
        let u: f64 = std_normal.sample(&mut b.rng);
        let weights: Vec<f64> = groups
            .iter()
            .map(|&g| spec.tier_mass.get(g) * (spec.gamma * u * leniency(g)).exp())
            .collect();
        let g = groups[WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidInput(format!("tier weights: {e}")))?
            .sample(&mut b.rng)];
        let states = &tiers[&g];
        let state = states[b.rng.gen_range(0..states.len())].clone();
        let bot = b.rng.gen_bool(spec.bot_rate);
        b.study_user(i, u, g, &state, bot);
    }
    let n_extra = |rate: f64| (spec.n_users as f64 * rate).round() as usize;
    for i in 0..n_extra(spec.promo_rate) {
        b.promo_user(i, &all_states);
    }
    for i in 0..n_extra(spec.foreign_rate) {
        b.foreign_user(i, &all_states);
    }
    Ok(b.out)
}

/// Uptake rises with control-tier leniency: the effect against illegal
/// states is largest and against previously recreational states zero.
pub fn policy_gradient_spec(base: &GeneratorSpec) -> GeneratorSpec {
    GeneratorSpec {
        tau: TierEffects {
            c1: 1.0,
            c2: 0.6,
            c3: 0.3,
            c4: 0.0,
        },
        ..base.clone()
    }
}

pub fn policy_gradient_fixture(base: &GeneratorSpec) -> Result<SynthCorpus> {
    generate(&policy_gradient_spec(base))
}

const GAZETTEER_CSV: &str = include_str!("../../data/gazetteer.csv");
const LEXICON_CSV: &str = include_str!("../../data/lexicon.csv");

/// Names of the files [`SynthCorpus::write_files`] produces.
pub mod files {
    pub const TWEETS: &str = "tweets.jsonl";
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const GAZETTEER: &str = "gazetteer.csv";
    pub const POLICY: &str = "policy.csv";
    pub const LEXICON: &str = "lexicon.csv";
    pub const BLOCKLIST: &str = "blocklist.txt";
    pub const SCORES: &str = "scores.csv";
    pub const STANCE_ANNOTATIONS: &str = "stance_annotations.csv";
    pub const GROUND_TRUTH: &str = "ground_truth.json";
}

impl SynthCorpus {
    /// Ids of the study users, bots excluded.
    pub fn study_user_ids(&self) -> impl Iterator<Item = &String> {
        self.latent.keys()
    }

    /// Writes every input file the pipeline reads into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };

        let mut buf = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        put(files::TWEETS, buf)?;

        let mut buf = Vec::new();
        for (token, x) in &self.embeddings {
            write!(buf, "{token}").expect("write to vec");
            for v in x {
                write!(buf, " {v}").expect("write to vec");
            }
            buf.push(b'\n');
        }
        put(files::EMBEDDINGS, buf)?;

        put(files::GAZETTEER, GAZETTEER_CSV.as_bytes().to_vec())?;
        put(files::LEXICON, LEXICON_CSV.as_bytes().to_vec())?;
        let mut buf = Vec::new();
        self.policy.write_csv(&mut buf)?;
        put(files::POLICY, buf)?;

        let mut buf = String::new();
        for id in &self.blocklist {
            buf.push_str(id);
            buf.push('\n');
        }
        put(files::BLOCKLIST, buf.into_bytes())?;

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tweet_id", "score"])?;
        for (id, s) in &self.scores {
            w.write_record([id.as_str(), &s.to_string()])?;
        }
        put(files::SCORES, w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?)?;

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tweet_id", "text", "label", "split"])?;
        for (id, text, label, train) in &self.annotations {
            let split = if *train { "train" } else { "eval" };
            w.write_record([id.as_str(), text, &label.to_string(), split])?;
        }
        put(files::STANCE_ANNOTATIONS, w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?)?;

        put(files::GROUND_TRUTH, serde_json::to_vec_pretty(&self.truth)?)?;
        Ok(written)
    }
}
