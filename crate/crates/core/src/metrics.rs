//! Discrimination rates, tag similarity and ranking quality.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::MFDVL_LEN;
use crate::porter;

pub const RANGE_MFDVL: f64 = 1.0;
/// Value range assumed for 13 MFCCs when turning distances into rates.
pub const RANGE_MFCC13: f64 = 56.3;
pub const MFCC13_LEN: usize = 13;

/// Tags are dropped outright when they contain this text.
pub const UBIQUITOUS_TAG: &str = "fieldrecord";

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// RMS of the elementwise difference, divided by `range`.
pub fn discrimination_rate(a: &[f64], b: &[f64], range: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::LengthMismatch("empty vectors".into()));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::param("range", format!("must be positive, got {range}")));
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt() / range)
}

fn expect_len(v: &[f64], n: usize, which: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{which} has {} values, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

pub fn dr_mfdvl(a: &[f64], b: &[f64]) -> Result<f64> {
    expect_len(a, MFDVL_LEN, "first MFD-VL vector")?;
    expect_len(b, MFDVL_LEN, "second MFD-VL vector")?;
    discrimination_rate(a, b, RANGE_MFDVL)
}

pub fn dr_mfcc13(a: &[f64], b: &[f64]) -> Result<f64> {
    expect_len(a, MFCC13_LEN, "first MFCC vector")?;
    expect_len(b, MFCC13_LEN, "second MFCC vector")?;
    discrimination_rate(a, b, RANGE_MFCC13)
}

/// One token per line; blank lines and `#` comments are skipped.
/// Entries are lowercased.
pub fn parse_stopwords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn default_stopwords() -> Vec<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagSet {
    tags: BTreeSet<String>,
}

impl TagSet {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(String::as_str)
    }
}

/// Lowercase, remove hyphens, drop anything mentioning `fieldrecord`, split
/// on whitespace and punctuation, stem, and drop stopwords (matched against
/// either the token or its stem).
pub fn normalize_tags<S: AsRef<str>>(raw: &[S], stopwords: &[String]) -> TagSet {
    let stop: BTreeSet<&str> = stopwords.iter().map(String::as_str).collect();
    let mut tags = BTreeSet::new();
    for tag in raw {
        let lowered: String = tag.as_ref().to_lowercase().chars().filter(|&c| c != '-').collect();
        if lowered.contains(UBIQUITOUS_TAG) {
            continue;
        }
        for token in lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            if stop.contains(token) {
                continue;
            }
            let stemmed = porter::stem(token);
            if stemmed.is_empty() || stop.contains(stemmed.as_str()) || stemmed.contains(UBIQUITOUS_TAG) {
                continue;
            }
            tags.insert(stemmed);
        }
    }
    TagSet { tags }
}

/// |a ∩ b| / |a ∪ b|; undefined when both sets are empty.
pub fn jaccard_si(a: &TagSet, b: &TagSet) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::Undefined("similarity of two empty tag sets is undefined".into()));
    }
    let inter = a.tags.intersection(&b.tags).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

pub fn precision_at_k<L: PartialEq>(ranked: &[L], key: &L, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if ranked.len() < k {
        return Err(Error::param(
            "k",
            format!("ranked list has only {} entries, k = {k}", ranked.len()),
        ));
    }
    let hits = ranked[..k].iter().filter(|l| *l == key).count();
    Ok(hits as f64 / k as f64)
}
