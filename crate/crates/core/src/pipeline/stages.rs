use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::RunConfig;
use super::manifest::{config_hash, file_digest, sha256_hex, stage_key, Manifest, MANIFEST_FILE};
use super::report::{write_ate_csv, write_balance_csv, write_plot_csv, write_sensitivity_csv};
use crate::causal::{estimate, run_sensitivity, EstimateReport, SensitivityReport, StudyCorpus};
use crate::classify::{rows_to_array, BoostedModel, CalibratedModel, Classifier, Model};
use crate::cohort::PolicyTable;
use crate::corpus::{
    build_users, embed_text, embed_tweets, filter_bots, ingest, Blocklist, Dataset, DropCounts, EmbeddingTable,
    Gazetteer, Tweet,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_classifier, ClassifierEval};
use crate::stance::{load_stance_annotations, predict_stance, train_stance_model, Split};
use crate::synth::generate;
use crate::weaklabel::{
    classify_personal, load_scores, majority_personal_users, train_personal_classifier, SubjectivityLexicon,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Weaklabel,
    Stance,
    Estimate,
    Sensitivity,
    Report,
    Synth,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Weaklabel => "weaklabel",
            Stage::Stance => "stance",
            Stage::Estimate => "estimate",
            Stage::Sensitivity => "sensitivity",
            Stage::Report => "report",
            Stage::Synth => "synth",
        }
    }

    pub fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Ingest | Stage::Synth => None,
            Stage::Weaklabel => Some(Stage::Ingest),
            Stage::Stance => Some(Stage::Weaklabel),
            Stage::Estimate | Stage::Sensitivity => Some(Stage::Stance),
            Stage::Report => Some(Stage::Estimate),
        }
    }

    pub fn dir(self, out_dir: &Path) -> PathBuf {
        out_dir.join(self.name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a stage's manifest will record, derived from config and inputs.
#[derive(Debug, Clone)]
pub struct StagePlan {
    pub parameters: serde_json::Value,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub upstream: Option<String>,
    pub key: String,
}

fn digest_inputs(cfg: &RunConfig, files: &[(&str, Option<&PathBuf>)]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (name, path) in files {
        if let Some(p) = path {
            let path = cfg.resolve(p);
            out.insert((*name).to_string(), file_digest(&path)?);
        }
    }
    Ok(out)
}

pub fn plan(stage: Stage, cfg: &RunConfig) -> Result<StagePlan> {
    let p = &cfg.paths;
    let (parameters, inputs) = match stage {
        Stage::Ingest => (
            json!({ "ingest": cfg.ingest, "embedding_dim": cfg.embedding_dim }),
            digest_inputs(
                cfg,
                &[
                    ("tweets", Some(&p.tweets)),
                    ("embeddings", Some(&p.embeddings)),
                    ("gazetteer", p.gazetteer.as_ref()),
                    ("blocklist", p.blocklist.as_ref()),
                ],
            )?,
        ),
        Stage::Weaklabel => (
            json!({ "seed": cfg.seed, "weaklabel": cfg.weaklabel, "personal": cfg.personal }),
            digest_inputs(cfg, &[("lexicon", p.lexicon.as_ref()), ("scores", p.scores.as_ref())])?,
        ),
        Stage::Stance => (
            json!({ "seed": cfg.seed, "stance": cfg.stance }),
            digest_inputs(
                cfg,
                &[
                    ("stance_annotations", Some(&p.stance_annotations)),
                    ("embeddings", Some(&p.embeddings)),
                ],
            )?,
        ),
        Stage::Estimate | Stage::Sensitivity => (
            json!({
                "seed": cfg.seed,
                "study": cfg.study,
                "legalization_date": cfg.legalization_date()?,
                "estimate": cfg.estimate,
            }),
            digest_inputs(cfg, &[("policy", p.policy.as_ref())])?,
        ),
        Stage::Report => (json!({}), BTreeMap::new()),
        Stage::Synth => (json!({ "seed": cfg.seed, "synth": cfg.synth }), BTreeMap::new()),
    };
    let upstream = match stage.upstream() {
        Some(up) => Some(plan(up, cfg)?.key),
        None => None,
    };
    let hash = config_hash(&parameters)?;
    let key = stage_key(stage.name(), &hash, upstream.as_deref(), &inputs);
    Ok(StagePlan {
        parameters,
        config_hash: hash,
        inputs,
        upstream,
        key,
    })
}

/// Loads a finished stage's manifest and checks that it was produced by
/// the current config and inputs and that its outputs are untouched.
pub fn check_stage(stage: Stage, cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    let dir = stage.dir(out_dir);
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact {
            stage: stage.name().into(),
            detail: format!("no manifest at {}; run `{stage}` first", path.display()),
        });
    }
    let manifest = Manifest::load(&path)?;
    let expected = plan(stage, cfg)?;
    if manifest.stage_key != expected.key {
        return Err(Error::StaleArtifact {
            stage: stage.name().into(),
            detail: format!(
                "outputs in {} were produced from a different config or inputs; rerun `{stage}`",
                dir.display()
            ),
        });
    }
    manifest.verify_outputs(&dir)?;
    Ok(manifest)
}

struct StageWriter {
    stage: Stage,
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl StageWriter {
    fn new(stage: Stage, dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(StageWriter {
            stage,
            dir,
            outputs: BTreeMap::new(),
        })
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.bytes(name, &bytes)
    }

    fn tweets(&mut self, name: &str, tweets: &[Tweet]) -> Result<()> {
        let mut buf = Vec::new();
        for t in tweets {
            serde_json::to_writer(&mut buf, t)?;
            buf.push(b'\n');
        }
        self.bytes(name, &buf)
    }

    fn finish(self, cfg: &RunConfig, plan: StagePlan) -> Result<Manifest> {
        let manifest = Manifest {
            stage: self.stage.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            config_hash: plan.config_hash,
            stage_key: plan.key,
            upstream: plan.upstream,
            parameters: plan.parameters,
            inputs: plan.inputs,
            outputs: self.outputs,
        };
        manifest.save(&self.dir.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}

const TWEETS_FILE: &str = "tweets.jsonl";

pub fn read_tweets(path: &Path) -> Result<Vec<Tweet>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn load_embeddings(cfg: &RunConfig) -> Result<EmbeddingTable> {
    let table = EmbeddingTable::load(&cfg.resolve(&cfg.paths.embeddings))?;
    if let Some(dim) = cfg.embedding_dim {
        if table.dim() != dim {
            return Err(Error::Config {
                path: "embedding_dim".into(),
                message: format!("config says {dim} but the embedding file has width {}", table.dim()),
            });
        }
    }
    Ok(table)
}

fn load_policy(cfg: &RunConfig) -> Result<PolicyTable> {
    match &cfg.paths.policy {
        Some(p) => PolicyTable::load(&cfg.resolve(p)),
        None => Ok(PolicyTable::builtin()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub tweets: usize,
    pub users: usize,
    pub malformed: usize,
    pub dropped: DropCounts,
    pub no_embedding: usize,
    pub bot_users: usize,
    pub bot_tweets: usize,
}

pub fn run_ingest(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    let plan = plan(Stage::Ingest, cfg)?;
    let gazetteer = match &cfg.paths.gazetteer {
        Some(p) => Gazetteer::load(&cfg.resolve(p))?,
        None => Gazetteer::builtin(),
    };
    let report = ingest(&cfg.resolve(&cfg.paths.tweets), &cfg.ingest.filters(), &gazetteer)?;
    let table = load_embeddings(cfg)?;
    let (mut tweets, no_embedding) = embed_tweets(report.tweets, &table);
    let blocklist = Blocklist::load(
        cfg.paths.blocklist.as_ref().map(|p| cfg.resolve(p)).as_deref(),
        cfg.ingest.disable_blocklist,
    )?;
    let (users, bot_users) = filter_bots(build_users(&tweets), &blocklist);
    let keep: BTreeSet<&str> = users.iter().map(|u| u.id.as_str()).collect();
    let before = tweets.len();
    tweets.retain(|t| keep.contains(t.user_id.as_str()));
    let summary = IngestSummary {
        tweets: tweets.len(),
        users: users.len(),
        malformed: report.malformed.len(),
        dropped: report.dropped,
        no_embedding,
        bot_users,
        bot_tweets: before - tweets.len(),
    };
    tracing::info!(tweets = summary.tweets, users = summary.users, "ingest done");
    let mut w = StageWriter::new(Stage::Ingest, Stage::Ingest.dir(out_dir))?;
    w.tweets(TWEETS_FILE, &tweets)?;
    w.json("summary.json", &summary)?;
    w.finish(cfg, plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalSummary {
    pub dataset: Dataset,
    pub tweets: usize,
    pub lf_accuracies: Vec<f64>,
    pub lf_abstain_rates: Vec<f64>,
    pub prior: f64,
    pub label_model_iterations: usize,
    pub fallback_scorer: bool,
    pub training_rows: usize,
    pub personal_tweets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelSummary {
    pub datasets: Vec<PersonalSummary>,
    pub users_kept: usize,
    pub tweets_kept: usize,
}

fn dataset_seed(seed: u64, d: Dataset) -> u64 {
    seed.wrapping_add(match d {
        Dataset::Juul => 0,
        Dataset::Cannabis => 1,
    })
}

fn model_file(d: Dataset) -> String {
    format!("model_{}.json", d.as_str().to_ascii_lowercase())
}

pub fn run_weaklabel(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    check_stage(Stage::Ingest, cfg, out_dir)?;
    let plan = plan(Stage::Weaklabel, cfg)?;
    let mut tweets = read_tweets(&Stage::Ingest.dir(out_dir).join(TWEETS_FILE))?;
    let lexicon = match &cfg.paths.lexicon {
        Some(p) => SubjectivityLexicon::load(&cfg.resolve(p))?,
        None => SubjectivityLexicon::builtin(),
    };
    let scores: Option<HashMap<String, f64>> = match &cfg.paths.scores {
        Some(p) => {
            let path = cfg.resolve(p);
            let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            Some(load_scores(file)?)
        }
        None => None,
    };
    let mut models: BTreeMap<Dataset, BoostedModel> = BTreeMap::new();
    let mut summaries = Vec::new();
    for d in [Dataset::Juul, Dataset::Cannabis] {
        let subset: Vec<Tweet> = tweets.iter().filter(|t| t.dataset == d).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        let outcome = train_personal_classifier(
            &subset,
            &lexicon,
            scores.as_ref(),
            &cfg.weaklabel,
            dataset_seed(cfg.seed, d),
        )?;
        summaries.push(PersonalSummary {
            dataset: d,
            tweets: subset.len(),
            lf_accuracies: outcome.label_model.accuracies.clone(),
            lf_abstain_rates: outcome.label_model.abstain_rates.clone(),
            prior: outcome.label_model.prior,
            label_model_iterations: outcome.label_model.iterations,
            fallback_scorer: outcome.fallback_scorer,
            training_rows: outcome.sample.indices.len(),
            personal_tweets: 0,
        });
        models.insert(d, outcome.classifier);
    }
    let flags = classify_personal(&mut tweets, |d| models.get(&d), &cfg.personal)?;
    for s in &mut summaries {
        s.personal_tweets = tweets
            .iter()
            .zip(&flags)
            .filter(|(t, &f)| f && t.dataset == s.dataset)
            .count();
    }
    let users = majority_personal_users(&tweets, &flags);
    tweets.retain(|t| users.contains(&t.user_id));
    let summary = WeakLabelSummary {
        datasets: summaries,
        users_kept: users.len(),
        tweets_kept: tweets.len(),
    };
    tracing::info!(users = summary.users_kept, "weak labelling done");
    let mut w = StageWriter::new(Stage::Weaklabel, Stage::Weaklabel.dir(out_dir))?;
    w.tweets(TWEETS_FILE, &tweets)?;
    for (d, m) in &models {
        w.bytes(&model_file(*d), Model::Boosted(m.clone()).to_json()?.as_bytes())?;
    }
    w.json("summary.json", &summary)?;
    w.finish(cfg, plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceEval {
    pub dataset: Dataset,
    pub train_rows: usize,
    pub eval_rows: usize,
    pub eval: Option<ClassifierEval>,
}

pub fn run_stance(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    check_stage(Stage::Weaklabel, cfg, out_dir)?;
    let plan = plan(Stage::Stance, cfg)?;
    let mut tweets = read_tweets(&Stage::Weaklabel.dir(out_dir).join(TWEETS_FILE))?;
    let table = load_embeddings(cfg)?;
    let path = cfg.resolve(&cfg.paths.stance_annotations);
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let annotations = load_stance_annotations(file)?;
    let filters = cfg.ingest.filters();
    let mut by_dataset: BTreeMap<Dataset, [(Vec<Vec<f64>>, Vec<usize>); 2]> = BTreeMap::new();
    let mut skipped = 0usize;
    for a in &annotations {
        let (Some(d), Some(x)) = (filters.dataset_of(&a.text), embed_text(&a.text, &table)) else {
            skipped += 1;
            continue;
        };
        let slot = &mut by_dataset.entry(d).or_default()[(a.split == Split::Eval) as usize];
        slot.0.push(x);
        slot.1.push(a.label.index());
    }
    if skipped > 0 {
        tracing::warn!(skipped, "annotations without a dataset keyword or embedding were skipped");
    }
    let mut models: BTreeMap<Dataset, CalibratedModel> = BTreeMap::new();
    let mut evals = Vec::new();
    for (d, [(xt, yt), (xe, ye)]) in &by_dataset {
        let x = rows_to_array(xt)?;
        let model = train_stance_model(x.view(), yt, &cfg.stance, dataset_seed(cfg.seed, *d))?;
        let eval = if xe.is_empty() {
            None
        } else {
            let probs = xe.iter().map(|r| model.predict_proba(r)).collect::<Result<Vec<_>>>()?;
            evaluate_classifier(ye, &probs).ok()
        };
        evals.push(StanceEval {
            dataset: *d,
            train_rows: yt.len(),
            eval_rows: ye.len(),
            eval,
        });
        models.insert(*d, model);
    }
    for t in tweets.iter_mut() {
        let model = models
            .get(&t.dataset)
            .ok_or_else(|| Error::Untrained(format!("no stance annotations for {}", t.dataset)))?;
        predict_stance(t, Some(model))?;
    }
    let mut w = StageWriter::new(Stage::Stance, Stage::Stance.dir(out_dir))?;
    w.tweets(TWEETS_FILE, &tweets)?;
    for (d, m) in &models {
        w.bytes(&model_file(*d), Model::Calibrated(m.clone()).to_json()?.as_bytes())?;
    }
    w.json("eval.json", &evals)?;
    w.finish(cfg, plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub include_retweets: bool,
    pub users: usize,
    pub tweets: usize,
    pub mean_eligible: f64,
}

pub fn run_estimate(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    check_stage(Stage::Stance, cfg, out_dir)?;
    let plan = plan(Stage::Estimate, cfg)?;
    let tweets = read_tweets(&Stage::Stance.dir(out_dir).join(TWEETS_FILE))?;
    let est = cfg.estimation()?;
    let corpus = StudyCorpus::from_tweets(&tweets, est.legalization_date, cfg.study.include_retweets)?;
    let report = estimate(&corpus, &est, &load_policy(cfg)?)?;
    let population = PopulationSummary {
        include_retweets: cfg.study.include_retweets,
        users: corpus.users.len(),
        tweets: corpus.n_tweets(),
        mean_eligible: report.mean_eligible,
    };
    let mut w = StageWriter::new(Stage::Estimate, Stage::Estimate.dir(out_dir))?;
    w.json("report.json", &report)?;
    w.json("population.json", &population)?;
    w.finish(cfg, plan)
}

pub fn run_sensitivity_stage(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    check_stage(Stage::Stance, cfg, out_dir)?;
    let plan = plan(Stage::Sensitivity, cfg)?;
    let tweets = read_tweets(&Stage::Stance.dir(out_dir).join(TWEETS_FILE))?;
    let report = run_sensitivity(&tweets, &cfg.estimation()?, &load_policy(cfg)?)?;
    let mut w = StageWriter::new(Stage::Sensitivity, Stage::Sensitivity.dir(out_dir))?;
    w.json("report.json", &report)?;
    w.finish(cfg, plan)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Turns the estimate (and, when present and current, the sensitivity)
/// results into CSV reports.
pub fn run_report(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    check_stage(Stage::Estimate, cfg, out_dir)?;
    let plan = plan(Stage::Report, cfg)?;
    let report: EstimateReport = read_json(&Stage::Estimate.dir(out_dir).join("report.json"))?;
    let mut w = StageWriter::new(Stage::Report, Stage::Report.dir(out_dir))?;
    let mut buf = Vec::new();
    write_ate_csv(&report, &mut buf)?;
    w.bytes("ate.csv", &buf)?;
    let mut buf = Vec::new();
    write_balance_csv(&report, &mut buf)?;
    w.bytes("balance.csv", &buf)?;
    let mut buf = Vec::new();
    write_plot_csv(&report, &mut buf)?;
    w.bytes("plot.csv", &buf)?;
    if Stage::Sensitivity.dir(out_dir).join(MANIFEST_FILE).exists() {
        check_stage(Stage::Sensitivity, cfg, out_dir)?;
        let sens: SensitivityReport = read_json(&Stage::Sensitivity.dir(out_dir).join("report.json"))?;
        let mut buf = Vec::new();
        write_sensitivity_csv(&sens, &mut buf)?;
        w.bytes("sensitivity.csv", &buf)?;
    }
    w.finish(cfg, plan)
}

/// Generates a synthetic corpus into `out_dir` along with a `config.toml`
/// that runs the pipeline on it. The generator seed is the run seed.
pub fn run_synth(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    let plan = plan(Stage::Synth, cfg)?;
    let mut spec = cfg.synth.clone();
    spec.seed = cfg.seed;
    let corpus = generate(&spec)?;
    let files = corpus.write_files(out_dir)?;
    let mut run = RunConfig::for_synth(&spec);
    run.ingest = cfg.ingest.clone();
    run.weaklabel = cfg.weaklabel.clone();
    run.personal = cfg.personal;
    run.stance = cfg.stance.clone();
    run.estimate = cfg.estimate.clone();
    run.study.horizons = cfg.study.horizons.clone();
    run.study.include_retweets = cfg.study.include_retweets;
    let mut w = StageWriter {
        stage: Stage::Synth,
        dir: out_dir.to_path_buf(),
        outputs: BTreeMap::new(),
    };
    for f in &files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        w.outputs.insert(name, file_digest(f)?);
    }
    let mut text = Vec::new();
    writeln!(text, "# Pipeline config for the synthetic corpus in this directory.").expect("write to vec");
    text.extend_from_slice(run.to_toml()?.as_bytes());
    w.bytes("config.toml", &text)?;
    w.finish(cfg, plan)
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    match stage {
        Stage::Ingest => run_ingest(cfg, out_dir),
        Stage::Weaklabel => run_weaklabel(cfg, out_dir),
        Stage::Stance => run_stance(cfg, out_dir),
        Stage::Estimate => run_estimate(cfg, out_dir),
        Stage::Sensitivity => run_sensitivity_stage(cfg, out_dir),
        Stage::Report => run_report(cfg, out_dir),
        Stage::Synth => run_synth(cfg, out_dir),
    }
}

/// Runs ingest through report in order.
pub fn run_all(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<Manifest>> {
    [
        Stage::Ingest,
        Stage::Weaklabel,
        Stage::Stance,
        Stage::Estimate,
        Stage::Report,
    ]
    .into_iter()
    .map(|s| run_stage(s, cfg, out_dir))
    .collect()
}
