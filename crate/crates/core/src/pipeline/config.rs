use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::causal::{CiMode, EstimationConfig, Method};
use crate::classify::GbmOptions;
use crate::cohort::default_legalization_date;
use crate::corpus::{IngestFilters, StateCode};
use crate::error::{Error, Result};
use crate::stance::{Aggregation, StanceTrainOptions};
use crate::synth::GeneratorSpec;
use crate::weaklabel::{PersonalThresholds, WeakLabelOptions};

/// Input locations. Relative paths resolve against the config file's
/// directory. Optional inputs fall back to bundled data or are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub tweets: PathBuf,
    pub embeddings: PathBuf,
    pub stance_annotations: PathBuf,
    pub policy: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub scores: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            tweets: "tweets.jsonl".into(),
            embeddings: "embeddings.txt".into(),
            stance_annotations: "stance_annotations.csv".into(),
            policy: None,
            gazetteer: None,
            lexicon: None,
            blocklist: None,
            scores: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub languages: Vec<String>,
    pub excluded_users: Vec<String>,
    pub strict: bool,
    pub disable_blocklist: bool,
}

impl Default for IngestSection {
    fn default() -> Self {
        let f = IngestFilters::default();
        IngestSection {
            languages: f.languages,
            excluded_users: f.excluded_users,
            strict: f.strict,
            disable_blocklist: false,
        }
    }
}

impl IngestSection {
    pub fn filters(&self) -> IngestFilters {
        IngestFilters {
            languages: self.languages.clone(),
            excluded_users: self.excluded_users.clone(),
            strict: self.strict,
            ..IngestFilters::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub treatment_state: StateCode,
    /// Defaults to the known legalization date of the treatment state.
    pub legalization_date: Option<NaiveDate>,
    pub study_end: NaiveDate,
    pub horizons: Vec<u32>,
    pub include_retweets: bool,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            treatment_state: StateCode::new("CA").expect("valid code"),
            legalization_date: None,
            study_end: NaiveDate::from_ymd_opt(2018, 12, 31).expect("valid date"),
            horizons: (1..=6).collect(),
            include_retweets: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub n_sims: usize,
    pub methods: Vec<Method>,
    pub trim: [f64; 2],
    pub ci_mode: CiMode,
    pub lr_c: f64,
    pub gbm: GbmOptions,
    pub aggregation: Aggregation,
    pub min_group_size: usize,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            n_sims: 200,
            methods: Method::ALL.to_vec(),
            trim: [0.05, 0.95],
            ci_mode: CiMode::PaperLiteral,
            lr_c: 1.0,
            gbm: GbmOptions::default(),
            aggregation: Aggregation::Sum,
            min_group_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Expected embedding width; checked against the embedding file.
    pub embedding_dim: Option<usize>,
    pub paths: Paths,
    pub ingest: IngestSection,
    pub weaklabel: WeakLabelOptions,
    pub personal: PersonalThresholds,
    pub stance: StanceTrainOptions,
    pub study: StudySection,
    pub estimate: EstimateSection,
    pub synth: GeneratorSpec,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            embedding_dim: None,
            paths: Paths::default(),
            ingest: IngestSection::default(),
            weaklabel: WeakLabelOptions::default(),
            personal: PersonalThresholds::default(),
            stance: StanceTrainOptions::default(),
            study: StudySection::default(),
            estimate: EstimateSection::default(),
            synth: GeneratorSpec::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Parses TOML. Errors carry the dotted path of the offending field.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path: if path == "." { String::new() } else { path },
                message: e.into_inner().message().trim().to_string(),
            }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Self::from_toml_str(&text, &base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config {
            path: String::new(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, message: String| {
            Err(Error::Config {
                path: path.into(),
                message,
            })
        };
        let e = &self.estimate;
        if e.n_sims < 1 {
            return fail("estimate.n_sims", "must be at least 1".into());
        }
        if !(0.0 <= e.trim[0] && e.trim[0] < e.trim[1] && e.trim[1] <= 1.0) {
            return fail("estimate.trim", format!("need 0 <= lo < hi <= 1, got {:?}", e.trim));
        }
        if e.methods.is_empty() {
            return fail("estimate.methods", "at least one method is required".into());
        }
        if !(e.lr_c > 0.0 && e.lr_c.is_finite()) {
            return fail("estimate.lr_c", "must be positive".into());
        }
        if self.study.horizons.is_empty() || self.study.horizons.contains(&0) {
            return fail("study.horizons", "horizons must be non-empty and positive".into());
        }
        if let Some(0) = self.embedding_dim {
            return fail("embedding_dim", "must be positive".into());
        }
        for (path, p) in [
            ("personal.juul", self.personal.juul),
            ("personal.cannabis", self.personal.cannabis),
            ("weaklabel.confidence_threshold", self.weaklabel.confidence_threshold),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(path, format!("must lie in [0, 1], got {p}"));
            }
        }
        self.legalization_date().map(|_| ())
    }

    pub fn legalization_date(&self) -> Result<NaiveDate> {
        self.study
            .legalization_date
            .or_else(|| default_legalization_date(&self.study.treatment_state))
            .ok_or_else(|| Error::Config {
                path: "study.legalization_date".into(),
                message: format!(
                    "no default legalization date for {}; set it explicitly",
                    self.study.treatment_state
                ),
            })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn estimation(&self) -> Result<EstimationConfig> {
        let e = &self.estimate;
        Ok(EstimationConfig {
            treatment_state: self.study.treatment_state.clone(),
            legalization_date: self.legalization_date()?,
            study_end: self.study.study_end,
            horizons: self.study.horizons.clone(),
            methods: e.methods.clone(),
            trim: (e.trim[0], e.trim[1]),
            lr_c: e.lr_c,
            gbm: e.gbm.clone(),
            aggregation: e.aggregation,
            master_seed: self.seed,
            n_sims: e.n_sims,
            ci_mode: e.ci_mode,
            min_group_size: e.min_group_size,
        })
    }

    /// Config for running the pipeline on files written by the generator
    /// into the same directory.
    pub fn for_synth(spec: &GeneratorSpec) -> Self {
        RunConfig {
            seed: spec.seed,
            embedding_dim: Some(spec.embedding_dim),
            paths: Paths {
                policy: Some("policy.csv".into()),
                gazetteer: Some("gazetteer.csv".into()),
                lexicon: Some("lexicon.csv".into()),
                blocklist: Some("blocklist.txt".into()),
                scores: Some("scores.csv".into()),
                ..Paths::default()
            },
            study: StudySection {
                treatment_state: spec.treatment_state.clone(),
                legalization_date: Some(spec.legalization_date),
                study_end: spec.study_end,
                ..StudySection::default()
            },
            synth: spec.clone(),
            ..RunConfig::default()
        }
    }
}
