//! Stage orchestration: run configuration, content-addressed manifests and
//! report files.

mod config;
mod manifest;
mod report;
mod stages;

pub use config::{EstimateSection, IngestSection, Paths, RunConfig, StudySection};
pub use manifest::{config_hash, file_digest, sha256_hex, stage_key, Manifest, MANIFEST_FILE};
pub use report::{write_ate_csv, write_balance_csv, write_plot_csv, write_sensitivity_csv};
pub use stages::{
    check_stage, plan, read_tweets, run_all, run_estimate, run_ingest, run_report, run_sensitivity_stage,
    run_stage, run_stance, run_synth, run_weaklabel, IngestSummary, PersonalSummary, PopulationSummary, Stage,
    StanceEval, StagePlan, WeakLabelSummary,
};
