//! Raw-text ingestion: one document per line, whitespace tokenization.
//!
//! This is convenience plumbing; the canonical corpus representation is the
//! vocabulary file plus Matrix Market counts it produces.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::{BowCorpus, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub lowercase: bool,
    /// Keep tokens appearing in at least this many documents.
    pub min_df: usize,
    pub stopwords: HashSet<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            lowercase: true,
            min_df: 1,
            stopwords: HashSet::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub vocab_size: usize,
    pub n_docs: usize,
    pub total_tokens: u64,
    /// Documents left empty by filtering and therefore dropped, together
    /// with their labels so alignment of the written files stays exact.
    pub dropped_docs: usize,
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(Error::io(&shown))?;
    let mut set = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(Error::io(&shown))?;
        let tok = line.trim();
        if !tok.is_empty() {
            set.insert(tok.to_string());
        }
    }
    Ok(set)
}

/// Tokenize a text file into a corpus. `labels` must align with the input
/// lines when present; labels of dropped documents are dropped with them.
pub fn ingest_text(
    path: &Path,
    labels: Option<Vec<u32>>,
    opts: &IngestOptions,
) -> Result<(BowCorpus, IngestSummary)> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(Error::io(&shown))?;

    let mut raw_docs: Vec<Vec<String>> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(Error::io(&shown))?;
        let mut toks = Vec::new();
        for tok in line.split_whitespace() {
            let tok = if opts.lowercase {
                tok.to_lowercase()
            } else {
                tok.to_string()
            };
            if !opts.stopwords.contains(&tok) {
                toks.push(tok);
            }
        }
        raw_docs.push(toks);
    }
    if raw_docs.is_empty() {
        return Err(Error::data(format!("{shown}: no documents")));
    }
    if let Some(ref l) = labels {
        if l.len() != raw_docs.len() {
            return Err(Error::data(format!(
                "{shown}: {} labels for {} documents",
                l.len(),
                raw_docs.len()
            )));
        }
    }

    // Document frequencies over the filtered token stream.
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in &raw_docs {
        let mut seen: HashSet<&str> = HashSet::new();
        for tok in doc {
            if seen.insert(tok) {
                *df.entry(tok).or_insert(0) += 1;
            }
        }
    }
    let kept: Vec<String> = {
        // BTreeMap gives a stable lexicographic vocabulary order.
        let mut sorted: BTreeMap<&str, usize> = BTreeMap::new();
        for (tok, n) in &df {
            if *n >= opts.min_df {
                sorted.insert(tok, *n);
            }
        }
        sorted.keys().map(|s| s.to_string()).collect()
    };
    if kept.is_empty() {
        return Err(Error::data(format!(
            "{shown}: filtering (min_df = {}) removed every token",
            opts.min_df
        )));
    }
    let vocab = Vocabulary::from_tokens(kept)?;

    let mut docs: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut kept_labels: Vec<u32> = Vec::new();
    let mut dropped = 0usize;
    let mut total_tokens = 0u64;
    for (i, doc) in raw_docs.iter().enumerate() {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for tok in doc {
            if let Some(id) = vocab.id(tok) {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            dropped += 1;
            continue;
        }
        total_tokens += counts.values().map(|&c| u64::from(c)).sum::<u64>();
        docs.push(counts.into_iter().collect());
        if let Some(ref l) = labels {
            kept_labels.push(l[i]);
        }
    }
    if docs.is_empty() {
        return Err(Error::data(format!(
            "{shown}: every document became empty after filtering"
        )));
    }

    let summary = IngestSummary {
        vocab_size: vocab.len(),
        n_docs: docs.len(),
        total_tokens,
        dropped_docs: dropped,
    };
    let corpus = BowCorpus::new(vocab, docs, labels.map(|_| kept_labels))?;
    Ok((corpus, summary))
}
