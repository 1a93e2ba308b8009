use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stance_causal::causal::{CiMode, Method};
use stance_causal::corpus::StateCode;
use stance_causal::pipeline::{run_all, run_stage, Manifest, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "stance-causal", version, about = "Stance-based causal effect estimation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory stage outputs are written under.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    n_sims: Option<usize>,

    #[arg(long, global = true)]
    treatment_state: Option<String>,

    /// YYYY-MM-DD
    #[arg(long, global = true)]
    legalization_date: Option<NaiveDate>,

    /// paper_literal or standard_error
    #[arg(long, global = true)]
    ci_mode: Option<String>,

    /// Drop retweets before estimation.
    #[arg(long, global = true)]
    no_retweets: bool,

    /// Comma-separated subset of IPTW-LR, IPTW-GBM, PSM-LR, PSM-GBM, NNM.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Vec<String>,

    /// Users to generate (synth only).
    #[arg(long, global = true)]
    n_users: Option<usize>,

    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Filter raw posts, resolve locations, embed, drop bots.
    Ingest,
    /// Train personal-post classifiers from labeling functions.
    Weaklabel,
    /// Train calibrated stance models and score every post.
    Stance,
    /// Repeated stance sampling and effect estimation.
    Estimate,
    /// Every method with and without retweets.
    Sensitivity,
    /// Write ATE, balance and plot CSVs.
    Report,
    /// Generate a synthetic corpus and its config into --out-dir.
    Synth,
    /// Ingest through report in one go.
    Run,
}

fn load_config(opts: &GlobalOpts) -> Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig {
            base_dir: std::env::current_dir().context("reading the working directory")?,
            ..RunConfig::default()
        },
    };
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(n) = opts.n_sims {
        cfg.estimate.n_sims = n;
    }
    if let Some(s) = &opts.treatment_state {
        cfg.study.treatment_state = StateCode::new(s)?;
        cfg.synth.treatment_state = cfg.study.treatment_state.clone();
    }
    if let Some(d) = opts.legalization_date {
        cfg.study.legalization_date = Some(d);
        cfg.synth.legalization_date = d;
    }
    if let Some(m) = &opts.ci_mode {
        cfg.estimate.ci_mode = m.parse::<CiMode>()?;
    }
    if opts.no_retweets {
        cfg.study.include_retweets = false;
    }
    if !opts.methods.is_empty() {
        cfg.estimate.methods = opts
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<stance_causal::Result<_>>()?;
    }
    if let Some(n) = opts.n_users {
        cfg.synth.n_users = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary(m: &Manifest, out_dir: &Path) -> serde_json::Value {
    json!({
        "stage": m.stage,
        "stage_key": m.stage_key,
        "dir": out_dir.display().to_string(),
        "outputs": m.outputs.keys().collect::<Vec<_>>(),
    })
}

fn run(cli: &Cli) -> Result<Vec<serde_json::Value>> {
    let cfg = load_config(&cli.opts)?;
    let out = &cli.opts.out_dir;
    let stage = match cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Weaklabel => Stage::Weaklabel,
        Command::Stance => Stage::Stance,
        Command::Estimate => Stage::Estimate,
        Command::Sensitivity => Stage::Sensitivity,
        Command::Report => Stage::Report,
        Command::Synth => Stage::Synth,
        Command::Run => {
            let manifests = run_all(&cfg, out)?;
            return Ok(manifests
                .iter()
                .map(|m| summary(m, &out.join(&m.stage)))
                .collect());
        }
    };
    let m = run_stage(stage, &cfg, out)?;
    let dir = if stage == Stage::Synth { out.clone() } else { stage.dir(out) };
    Ok(vec![summary(&m, &dir)])
}

fn error_json(err: &anyhow::Error) -> serde_json::Value {
    use stance_causal::Error as E;
    let mut obj = json!({ "kind": "other", "message": format!("{err:#}") });
    if let Some(e) = err.downcast_ref::<E>() {
        obj["kind"] = json!(e.kind());
        match e {
            E::MissingArtifact { stage, .. } | E::StaleArtifact { stage, .. } => obj["stage"] = json!(stage),
            E::Config { path, .. } => obj["field"] = json!(path),
            E::Parse { line, .. } => obj["line"] = json!(line),
            E::Io { path, .. } => obj["path"] = json!(path.display().to_string()),
            _ => {}
        }
    }
    json!({ "error": obj })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.opts.verbose {
        tracing_subscriber::filter::LevelFilter::INFO
    } else {
        tracing_subscriber::filter::LevelFilter::WARN
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .without_time()
        .init();
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}
