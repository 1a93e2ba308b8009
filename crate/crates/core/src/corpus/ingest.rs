use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{parse_location, Dataset, Gazetteer, Tweet};
use crate::error::{Error, Result};
use crate::text::{contains_phrase, tokenize};

/// One line of the tweet-record JSON Lines input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub user_id: String,
    pub created_at: String,
    pub text: String,
    pub lang: String,
    #[serde(default)]
    pub user_location: Option<String>,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub dataset: Option<Dataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFilter {
    pub dataset: Dataset,
    pub keywords: Vec<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DatasetFilter {
    fn matches_keywords(&self, tokens: &[String]) -> bool {
        self.keywords.iter().any(|k| {
            let phrase = tokenize(k);
            contains_phrase(tokens, &phrase)
        })
    }

    fn in_window(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestFilters {
    /// Checked in order when a record carries no dataset tag.
    pub datasets: Vec<DatasetFilter>,
    /// Accepted primary language subtags.
    pub languages: Vec<String>,
    /// Account ids dropped outright (official brand handles).
    pub excluded_users: Vec<String>,
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
}

impl IngestFilters {
    /// First dataset whose keywords occur in `text`.
    pub fn dataset_of(&self, text: &str) -> Option<Dataset> {
        let tokens = tokenize(text);
        self.datasets
            .iter()
            .find(|f| f.matches_keywords(&tokens))
            .map(|f| f.dataset)
    }
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl Default for IngestFilters {
    fn default() -> Self {
        let juul = ["juul", "juulvapor", "juulnation", "doit4juul"];
        let cannabis = [
            "weed",
            "ganja",
            "marijuana",
            "cannabis",
            "mary jane",
            "thc",
            "marihuana",
            "hash",
            "reefer",
            "hashish",
            "bhang",
            "cbd",
            "green goddess",
            "locoweed",
            "maryjane",
            "spliff",
            "hemp",
            "wacky baccy",
            "sinsemilla",
            "doobie",
            "acapulco gold",
        ];
        IngestFilters {
            datasets: vec![
                DatasetFilter {
                    dataset: Dataset::Juul,
                    keywords: juul.iter().map(|s| s.to_string()).collect(),
                    start: ymd(2016, 1, 1),
                    end: ymd(2018, 12, 31),
                },
                DatasetFilter {
                    dataset: Dataset::Cannabis,
                    keywords: cannabis.iter().map(|s| s.to_string()).collect(),
                    start: ymd(2014, 1, 1),
                    end: ymd(2018, 12, 31),
                },
            ],
            languages: vec!["en".into()],
            excluded_users: vec!["juulvapor".into()],
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Malformed {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub language: usize,
    pub location: usize,
    pub excluded_user: usize,
    pub keyword: usize,
    pub date: usize,
    pub duplicate: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub tweets: Vec<Tweet>,
    pub malformed: Vec<Malformed>,
    pub dropped: DropCounts,
}

pub(crate) fn parse_created_at(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc().date());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.date());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()
}

fn language_ok(lang: &str, allowed: &[String]) -> bool {
    let primary = lang.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
    allowed.iter().any(|a| a.eq_ignore_ascii_case(&primary))
}

pub fn ingest(path: &Path, filters: &IngestFilters, gazetteer: &Gazetteer) -> Result<IngestReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), filters, gazetteer)
}

/// Streams JSON Lines records through the language, location, account,
/// keyword and date filters.
pub fn ingest_reader<R: BufRead>(
    reader: R,
    filters: &IngestFilters,
    gazetteer: &Gazetteer,
) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<TweetRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| match parse_created_at(&r.created_at) {
                Some(d) => Ok((r, d)),
                None => Err(format!("unparseable created_at `{}`", r.created_at)),
            });
        let (record, date) = match parsed {
            Ok(v) => v,
            Err(message) => {
                if filters.strict {
                    return Err(Error::Parse {
                        line: line_no,
                        message,
                    });
                }
                tracing::warn!(line = line_no, %message, "skipping malformed record");
                report.malformed.push(Malformed {
                    line: line_no,
                    message,
                });
                continue;
            }
        };

        if !language_ok(&record.lang, &filters.languages) {
            report.dropped.language += 1;
            continue;
        }
        if filters
            .excluded_users
            .iter()
            .any(|u| u.eq_ignore_ascii_case(&record.user_id))
        {
            report.dropped.excluded_user += 1;
            continue;
        }
        let location = record.user_location.clone().unwrap_or_default();
        let Some(state) = parse_location(&location, gazetteer) else {
            report.dropped.location += 1;
            continue;
        };
        let tokens = tokenize(&record.text);
        let filter = match record.dataset {
            Some(ds) => filters
                .datasets
                .iter()
                .find(|f| f.dataset == ds && f.matches_keywords(&tokens)),
            None => filters.datasets.iter().find(|f| f.matches_keywords(&tokens)),
        };
        let Some(filter) = filter else {
            report.dropped.keyword += 1;
            continue;
        };
        if !filter.in_window(date) {
            report.dropped.date += 1;
            continue;
        }
        if !seen.insert(record.id.clone()) {
            report.dropped.duplicate += 1;
            continue;
        }
        report.tweets.push(Tweet {
            id: record.id,
            user_id: record.user_id,
            date,
            text: record.text,
            dataset: filter.dataset,
            is_retweet: record.is_retweet,
            lang: record.lang,
            location,
            state,
            embedding: None,
            p_personal: None,
            stance: None,
        });
    }
    Ok(report)
}

/// Writes tweets back in the input record format.
pub fn write_records<W: Write>(tweets: &[Tweet], mut writer: W) -> Result<()> {
    for t in tweets {
        let record = TweetRecord {
            id: t.id.clone(),
            user_id: t.user_id.clone(),
            created_at: t.date.format("%Y-%m-%d").to_string(),
            text: t.text.clone(),
            lang: t.lang.clone(),
            user_location: Some(t.location.clone()),
            is_retweet: t.is_retweet,
            dataset: Some(t.dataset),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, text: &str, date: &str, lang: &str, loc: &str) -> String {
        serde_json::json!({
            "id": id, "user_id": format!("u{id}"), "created_at": date, "text": text,
            "lang": lang, "user_location": loc, "is_retweet": false,
        })
        .to_string()
    }

    fn run(lines: &[String]) -> IngestReport {
        let input = lines.join("\n");
        ingest_reader(input.as_bytes(), &IngestFilters::default(), &Gazetteer::builtin()).unwrap()
    }

    #[test]
    fn keyword_match_assigns_juul_dataset() {
        let r = run(&[line("1", "my juul died", "2017-03-01T10:00:00Z", "en", "Austin, TX")]);
        assert_eq!(r.tweets.len(), 1);
        assert_eq!(r.tweets[0].dataset, Dataset::Juul);
        assert_eq!(r.tweets[0].date, ymd(2017, 3, 1));
        assert_eq!(r.tweets[0].state.as_str(), "TX");
    }

    #[test]
    fn non_english_is_dropped() {
        let r = run(&[line("1", "mi juul", "2017-03-01", "es", "Texas")]);
        assert!(r.tweets.is_empty());
        assert_eq!(r.dropped.language, 1);
    }

    #[test]
    fn regional_english_tags_pass() {
        let r = run(&[line("1", "my juul", "2017-03-01", "en-US", "Texas")]);
        assert_eq!(r.tweets.len(), 1);
    }

    #[test]
    fn outside_juul_window_is_dropped() {
        let r = run(&[
            line("1", "my juul", "2015-12-31", "en", "Texas"),
            line("2", "smoking weed", "2015-06-01", "en", "Texas"),
        ]);
        assert_eq!(r.dropped.date, 1);
        assert_eq!(r.tweets.len(), 1);
        assert_eq!(r.tweets[0].dataset, Dataset::Cannabis);
    }

    #[test]
    fn unknown_location_and_brand_handle_are_dropped() {
        let mut official = line("2", "new juul pods", "2017-01-01", "en", "SF, California");
        official = official.replace("\"u2\"", "\"JUULvapor\"");
        let r = run(&[line("1", "my juul", "2017-01-01", "en", "the moon"), official]);
        assert!(r.tweets.is_empty());
        assert_eq!(r.dropped.location, 1);
        assert_eq!(r.dropped.excluded_user, 1);
    }

    #[test]
    fn keywords_are_whole_token_and_multiword() {
        let r = run(&[
            line("1", "a hashbrown for breakfast", "2017-01-01", "en", "Ohio"),
            line("2", "Mary Jane all day", "2017-01-01", "en", "Ohio"),
            line("3", "#DoIt4Juul", "2017-01-01", "en", "Ohio"),
        ]);
        let ids: Vec<_> = r.tweets.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["2", "3"]);
    }

    #[test]
    fn malformed_lines_are_reported_and_skipped() {
        let good = line("1", "my juul", "2017-01-01", "en", "Ohio");
        let r = run(&["{not json".into(), good.clone(), line("2", "juul", "yesterday", "en", "Ohio")]);
        assert_eq!(r.tweets.len(), 1);
        let lines: Vec<_> = r.malformed.iter().map(|m| m.line).collect();
        assert_eq!(lines, vec![1, 3]);

        let strict = IngestFilters {
            strict: true,
            ..IngestFilters::default()
        };
        let input = format!("{good}\n{{not json");
        let err = ingest_reader(input.as_bytes(), &strict, &Gazetteer::builtin()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids_are_dropped() {
        let l = line("1", "my juul", "2017-01-01", "en", "Ohio");
        let r = run(&[l.clone(), l]);
        assert_eq!(r.tweets.len(), 1);
        assert_eq!(r.dropped.duplicate, 1);
    }

    #[test]
    fn explicit_dataset_tag_must_match_its_keywords() {
        let rec = serde_json::json!({
            "id": "9", "user_id": "u", "created_at": "2017-01-01", "text": "my juul",
            "lang": "en", "user_location": "Ohio", "dataset": "CANNABIS",
        });
        let r = run(&[rec.to_string()]);
        assert_eq!(r.dropped.keyword, 1);
    }
}
