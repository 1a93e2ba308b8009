use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::Tweet;
use crate::error::{Error, Result};
use crate::text::tokenize;

/// Token vectors of a single fixed dimension. Keys are case-folded.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector; the first vector for a case-folded token wins.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite vector for `{token}`")));
        }
        self.vectors.entry(token.to_lowercase()).or_insert(vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        match self.vectors.get(token) {
            Some(v) => Some(v),
            None => self.vectors.get(&token.to_lowercase()).map(Vec::as_slice),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    /// Parses `token v1 v2 ... vn` lines. A leading `count dim` header line
    /// (word2vec style) is skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Vec<&str> = fields.collect();
            if line_no == 1 && values.len() == 1 && token.parse::<usize>().is_ok() {
                continue;
            }
            let vector = values
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad float: {e}"),
                })?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            t.insert(token, vector).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        table.ok_or_else(|| Error::InvalidInput("embedding file has no vectors".into()))
    }
}

/// Mean vector over in-vocabulary tokens; `None` when no token is known.
pub fn embed_text(text: &str, table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut hits = 0usize;
    for token in tokenize(text) {
        if let Some(v) = table.get(&token) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            hits += 1;
        }
    }
    (hits > 0).then(|| sum.into_iter().map(|s| s / hits as f64).collect())
}

/// Embeds every tweet, dropping those with no vocabulary hits.
/// Returns the kept tweets and the number excluded.
pub fn embed_tweets(tweets: Vec<Tweet>, table: &EmbeddingTable) -> (Vec<Tweet>, usize) {
    let total = tweets.len();
    let kept: Vec<Tweet> = tweets
        .into_iter()
        .filter_map(|mut t| {
            t.embedding = Some(embed_text(&t.text, table)?);
            Some(t)
        })
        .collect();
    let excluded = total - kept.len();
    (kept, excluded)
}
