use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{contains_url, word_tokens};

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LfVote {
    Personal,
    NonPersonal,
    Abstain,
}

pub const FIRST_PERSON: [&str; 12] = [
    "i", "me", "my", "mine", "we", "us", "our", "ours", "i'm", "i've", "i'll", "i'd",
];

/// LF3 fires NonPersonal below this subjectivity score.
pub const SUBJECTIVITY_LOW: u32 = 1;
/// LF3 fires Personal above this subjectivity score.
pub const SUBJECTIVITY_HIGH: u32 = 4;
pub const EXTERNAL_HIGH: f64 = 0.6;
pub const EXTERNAL_LOW: f64 = 0.1;

/// Token to clue strength (weak = 1, strong = 2).
#[derive(Debug, Clone)]
pub struct SubjectivityLexicon {
    strengths: HashMap<String, u32>,
}

#[derive(Deserialize)]
struct LexiconRow {
    token: String,
    strength: String,
}

impl SubjectivityLexicon {
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_LEXICON.as_bytes()).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut strengths = HashMap::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, row) in rdr.deserialize::<LexiconRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            let s = match row.strength.to_ascii_lowercase().as_str() {
                "weak" | "weaksubj" => 1,
                "strong" | "strongsubj" => 2,
                other => {
                    return Err(Error::Parse {
                        line: i + 2,
                        message: format!("unknown clue strength `{other}`"),
                    })
                }
            };
            strengths.entry(row.token.to_lowercase()).or_insert(s);
        }
        if strengths.is_empty() {
            return Err(Error::InvalidInput("subjectivity lexicon is empty".into()));
        }
        Ok(SubjectivityLexicon { strengths })
    }

    pub fn len(&self) -> usize {
        self.strengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strengths.is_empty()
    }

    /// Sum of clue strengths over whole tokens.
    pub fn score(&self, text: &str) -> u32 {
        word_tokens(text)
            .iter()
            .filter_map(|t| self.strengths.get(t))
            .sum()
    }
}

pub fn lf_url(text: &str) -> LfVote {
    if contains_url(text) {
        LfVote::NonPersonal
    } else {
        LfVote::Personal
    }
}

pub fn lf_first_person(text: &str) -> LfVote {
    if word_tokens(text).iter().any(|t| FIRST_PERSON.contains(&t.as_str())) {
        LfVote::Personal
    } else {
        LfVote::Abstain
    }
}

pub fn lf_subjectivity(text: &str, lexicon: &SubjectivityLexicon) -> LfVote {
    let s = lexicon.score(text);
    if s < SUBJECTIVITY_LOW {
        LfVote::NonPersonal
    } else if s > SUBJECTIVITY_HIGH {
        LfVote::Personal
    } else {
        LfVote::Abstain
    }
}

pub fn lf_external(score: Option<f64>) -> LfVote {
    match score {
        Some(s) if s > EXTERNAL_HIGH => LfVote::Personal,
        Some(s) if s < EXTERNAL_LOW => LfVote::NonPersonal,
        _ => LfVote::Abstain,
    }
}

pub fn apply_labeling_functions(
    text: &str,
    lexicon: &SubjectivityLexicon,
    external_score: Option<f64>,
) -> [LfVote; 4] {
    [
        lf_url(text),
        lf_first_person(text),
        lf_subjectivity(text, lexicon),
        lf_external(external_score),
    ]
}

#[derive(Deserialize)]
struct ScoreRow {
    tweet_id: String,
    score: f64,
}

/// Reads `tweet_id,score` rows; scores must lie in [0, 1].
pub fn load_scores<R: Read>(reader: R) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&row.score) {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("score {} outside [0, 1]", row.score),
            });
        }
        out.insert(row.tweet_id, row.score);
    }
    Ok(out)
}
