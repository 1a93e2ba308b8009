use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::StateCode;
use crate::error::{Error, Result};

const BUILTIN_GAZETTEER: &str = include_str!("../../data/gazetteer.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Name,
    Abbrev,
    City,
}

#[derive(Debug, Deserialize)]
struct GazetteerRow {
    pattern: String,
    state_code: String,
    kind: PatternKind,
}

/// Maps state names, postal abbreviations and major cities to state codes.
///
/// Names and cities match case-insensitively as whole phrases, longest
/// phrase first. Abbreviations match only as upper-case standalone tokens,
/// so `"in"` or `"me"` in running text never resolve to a state.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    names: Vec<(String, StateCode)>,
    abbrevs: HashMap<String, StateCode>,
    cities: Vec<(String, StateCode)>,
}

fn normalize(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Gazetteer {
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_GAZETTEER.as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut names = Vec::new();
        let mut abbrevs = HashMap::new();
        let mut cities = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, row) in rdr.deserialize::<GazetteerRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            let code = StateCode::new(&row.state_code)?;
            match row.kind {
                PatternKind::Name => names.push((normalize(&row.pattern), code)),
                PatternKind::City => cities.push((normalize(&row.pattern), code)),
                PatternKind::Abbrev => {
                    abbrevs
                        .entry(row.pattern.trim().to_ascii_uppercase())
                        .or_insert(code);
                }
            }
        }
        if names.is_empty() && abbrevs.is_empty() && cities.is_empty() {
            return Err(Error::InvalidInput("gazetteer is empty".into()));
        }
        // Stable sort keeps file order among equal lengths.
        names.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
        cities.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
        Ok(Gazetteer {
            names,
            abbrevs,
            cities,
        })
    }

    /// Every state code the gazetteer can produce.
    pub fn states(&self) -> BTreeSet<StateCode> {
        self.names
            .iter()
            .map(|(_, c)| c.clone())
            .chain(self.abbrevs.values().cloned())
            .chain(self.cities.iter().map(|(_, c)| c.clone()))
            .collect()
    }
}

fn find_phrase<'a>(padded: &str, patterns: &'a [(String, StateCode)]) -> Option<&'a StateCode> {
    patterns
        .iter()
        .find(|(p, _)| !p.is_empty() && padded.contains(&format!(" {p} ")))
        .map(|(_, c)| c)
}

/// Resolves a free-text profile location to a state code.
///
/// Precedence is state name, then abbreviation, then city.
pub fn parse_location(text: &str, gazetteer: &Gazetteer) -> Option<StateCode> {
    let padded = format!(" {} ", normalize(text));
    if let Some(code) = find_phrase(&padded, &gazetteer.names) {
        return Some(code.clone());
    }
    let abbrev = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() == 2 && t.bytes().all(|b| b.is_ascii_uppercase()))
        .find_map(|t| gazetteer.abbrevs.get(t));
    if let Some(code) = abbrev {
        return Some(code.clone());
    }
    find_phrase(&padded, &gazetteer.cities).cloned()
}
