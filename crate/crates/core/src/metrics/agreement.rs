use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Nominal Krippendorff's alpha from the coincidence matrix.
///
/// `units[u][a]` is annotator `a`'s label for unit `u`, `None` if missing.
/// Units with fewer than two labels are not pairable and are ignored.
/// When every pairable value agrees the result is 1, including the case
/// of a single category where expected disagreement is also zero.
pub fn krippendorff_alpha<L: Ord + Clone>(units: &[Vec<Option<L>>]) -> Result<f64> {
    if units.iter().map(Vec::len).max().unwrap_or(0) < 2 {
        return Err(Error::InvalidInput("need at least two annotators".into()));
    }
    let mut o: BTreeMap<(L, L), f64> = BTreeMap::new();
    for unit in units {
        let values: Vec<&L> = unit.iter().flatten().collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                if i != j {
                    *o.entry(((*a).clone(), (*b).clone())).or_default() += w;
                }
            }
        }
    }
    if o.is_empty() {
        return Err(Error::InvalidInput("no pairable values".into()));
    }
    let mut n_c: BTreeMap<&L, f64> = BTreeMap::new();
    let mut disagree = 0.0;
    for ((c, k), v) in &o {
        *n_c.entry(c).or_default() += v;
        if c != k {
            disagree += v;
        }
    }
    if disagree == 0.0 {
        return Ok(1.0);
    }
    let n: f64 = n_c.values().sum();
    let marg: Vec<f64> = n_c.values().copied().collect();
    let mut expected = 0.0;
    for (i, a) in marg.iter().enumerate() {
        for (j, b) in marg.iter().enumerate() {
            if i != j {
                expected += a * b;
            }
        }
    }
    Ok(1.0 - (n - 1.0) * disagree / expected)
}

/// Mean over pairable units of the fraction of annotator pairs that agree,
/// as a percentage.
pub fn observed_agreement<L: PartialEq>(units: &[Vec<Option<L>>]) -> Result<f64> {
    if units.iter().map(Vec::len).max().unwrap_or(0) < 2 {
        return Err(Error::InvalidInput("need at least two annotators".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for unit in units {
        let values: Vec<&L> = unit.iter().flatten().collect();
        if values.len() < 2 {
            continue;
        }
        let (mut agree, mut pairs) = (0usize, 0usize);
        for i in 0..values.len() {
            for j in (i + 1)..values.len() {
                pairs += 1;
                agree += (values[i] == values[j]) as usize;
            }
        }
        total += agree as f64 / pairs as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::InvalidInput("no pairable values".into()));
    }
    Ok(100.0 * total / counted as f64)
}

/// Units x annotators label grid read from `unit_id,annotator_id,label`
/// rows. Units and annotators are ordered by first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    pub units: Vec<String>,
    pub annotators: Vec<String>,
    pub labels: Vec<Vec<Option<String>>>,
}

#[derive(Deserialize)]
struct AnnotationRow {
    unit_id: String,
    annotator_id: String,
    label: String,
}

pub fn load_annotations<R: Read>(reader: R) -> Result<AnnotationTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut units: Vec<String> = Vec::new();
    let mut annotators: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in rdr.deserialize::<AnnotationRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        let u = position_or_push(&mut units, row.unit_id);
        let a = position_or_push(&mut annotators, row.annotator_id);
        if !seen.insert((u, a)) {
            return Err(Error::Parse {
                line: i + 2,
                message: "duplicate (unit, annotator) pair".into(),
            });
        }
        cells.push((u, a, row.label));
    }
    let mut labels = vec![vec![None; annotators.len()]; units.len()];
    for (u, a, l) in cells {
        labels[u][a] = Some(l);
    }
    Ok(AnnotationTable {
        units,
        annotators,
        labels,
    })
}

fn position_or_push(list: &mut Vec<String>, item: String) -> usize {
    match list.iter().position(|x| *x == item) {
        Some(i) => i,
        None => {
            list.push(item);
            list.len() - 1
        }
    }
}
