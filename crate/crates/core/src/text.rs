//! Tokenization shared by keyword filtering, embedding lookup and the
//! labeling functions.

use std::sync::LazyLock;

use regex::Regex;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("valid url regex"));

static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@\w+").expect("valid mention regex"));

static WORD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[a-z0-9]+(?:'[a-z0-9]+)*").expect("valid word regex"));

pub fn contains_url(text: &str) -> bool {
    URL_RE.is_match(text)
}

/// Removes URLs and @mentions.
pub fn strip_urls_and_mentions(text: &str) -> String {
    let no_urls = URL_RE.replace_all(text, " ");
    MENTION_RE.replace_all(&no_urls, " ").into_owned()
}

/// Lowercased alphanumeric tokens after URL and mention removal.
pub fn tokenize(text: &str) -> Vec<String> {
    strip_urls_and_mentions(text)
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercased word tokens that keep inner apostrophes (`i'm`, `i've`).
pub fn word_tokens(text: &str) -> Vec<String> {
    let lowered = strip_urls_and_mentions(text)
        .to_lowercase()
        .replace(['\u{2019}', '\u{2018}'], "'");
    WORD_RE
        .find_iter(&lowered)
        .map(|m| m.as_str().to_owned())
        .collect()
}

/// Whole-token match of a (possibly multiword) phrase against a token list.
pub fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}
