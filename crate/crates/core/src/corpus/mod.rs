//! Bag-of-words corpora: vocabularies, sparse count matrices, batching.
//!
//! Counts are stored document-major (one sparse vector per document, i.e. one
//! column of the V x D count matrix). Corpora are immutable after
//! construction and safe to share across threads; batch iterators are
//! single-consumer.

pub mod ingest;
pub mod market;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

/// An ordered set of unique tokens; ids are positions in the order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::data("vocabulary is empty"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::data(format!("vocabulary entry {i} is empty")));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::data(format!("duplicate vocabulary token `{tok}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Read a vocabulary file: UTF-8, one token per line, no blanks.
    pub fn load(path: &Path) -> Result<Self> {
        let shown = path.display().to_string();
        let file = File::open(path).map_err(Error::io(&shown))?;
        let mut tokens = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(Error::io(&shown))?;
            let tok = line.trim_end_matches(['\r', '\n']);
            if tok.is_empty() {
                return Err(Error::parse(&shown, lineno, "blank line in vocabulary"));
            }
            if index.contains_key(tok) {
                return Err(Error::parse(
                    &shown,
                    lineno,
                    format!("duplicate token `{tok}`"),
                ));
            }
            index.insert(tok.to_string(), tokens.len() as u32);
            tokens.push(tok.to_string());
        }
        if tokens.is_empty() {
            return Err(Error::parse(&shown, 1, "empty vocabulary file"));
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let shown = path.display().to_string();
        let mut w = BufWriter::new(File::create(path).map_err(Error::io(&shown))?);
        for tok in &self.tokens {
            writeln!(w, "{tok}").map_err(Error::io(&shown))?;
        }
        w.flush().map_err(Error::io(&shown))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

/// Sparse document-word counts with an attached vocabulary and optional
/// per-document labels.
#[derive(Debug, Clone)]
pub struct BowCorpus {
    vocab: Vocabulary,
    /// One sparse column per document: (word id, count), sorted by word id.
    docs: Vec<Vec<(u32, u32)>>,
    labels: Option<Vec<u32>>,
}

impl BowCorpus {
    pub fn new(vocab: Vocabulary, docs: Vec<Vec<(u32, u32)>>, labels: Option<Vec<u32>>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::data("corpus has no documents"));
        }
        let v = vocab.len() as u32;
        for (d, doc) in docs.iter().enumerate() {
            if doc.is_empty() {
                return Err(Error::data(format!("document {d} is empty")));
            }
            let mut last: Option<u32> = None;
            for &(w, count) in doc {
                if w >= v {
                    return Err(Error::data(format!(
                        "document {d}: word id {w} outside vocabulary of size {v}"
                    )));
                }
                if count == 0 {
                    return Err(Error::data(format!("document {d}: zero count for word {w}")));
                }
                if let Some(prev) = last {
                    if w <= prev {
                        return Err(Error::data(format!(
                            "document {d}: word ids not strictly increasing"
                        )));
                    }
                }
                last = Some(w);
            }
        }
        if let Some(ref l) = labels {
            if l.len() != docs.len() {
                return Err(Error::data(format!(
                    "label count {} does not match document count {}",
                    l.len(),
                    docs.len()
                )));
            }
        }
        Ok(BowCorpus { vocab, docs, labels })
    }

    /// Load counts from a Matrix Market coordinate file whose row dimension
    /// must equal the vocabulary size. Documents with zero total count are
    /// rejected, not dropped, so label alignment stays unambiguous.
    pub fn load(counts_path: &Path, vocab: Vocabulary) -> Result<Self> {
        let coo = market::read_counts(counts_path)?;
        if coo.rows != vocab.len() {
            return Err(Error::data(format!(
                "{}: matrix has {} rows but vocabulary has {} tokens",
                counts_path.display(),
                coo.rows,
                vocab.len()
            )));
        }
        let mut docs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); coo.cols];
        for (i, j, v) in coo.entries {
            docs[j as usize].push((i, v));
        }
        for doc in &mut docs {
            doc.sort_unstable_by_key(|&(w, _)| w);
        }
        let empty: Vec<usize> = docs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_empty())
            .map(|(i, _)| i)
            .collect();
        if !empty.is_empty() {
            let head: Vec<String> = empty.iter().take(8).map(|i| i.to_string()).collect();
            return Err(Error::data(format!(
                "{}: {} document(s) have zero total count (first: {})",
                counts_path.display(),
                empty.len(),
                head.join(", ")
            )));
        }
        Self::new(vocab, docs, None)
    }

    /// Attach labels from a file with one nonnegative integer per line.
    pub fn load_labels(&mut self, path: &Path) -> Result<()> {
        let shown = path.display().to_string();
        let file = File::open(path).map_err(Error::io(&shown))?;
        let mut labels = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(Error::io(&shown))?;
            let text = line.trim();
            let value: u32 = text
                .parse()
                .map_err(|_| Error::parse(&shown, idx + 1, format!("bad label `{text}`")))?;
            labels.push(value);
        }
        if labels.len() != self.docs.len() {
            return Err(Error::data(format!(
                "{shown}: {} labels for {} documents",
                labels.len(),
                self.docs.len()
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn save_counts(&self, path: &Path) -> Result<()> {
        market::write_counts(path, &self.to_coo())
    }

    pub fn save_labels(&self, path: &Path) -> Result<()> {
        let shown = path.display().to_string();
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::data("corpus has no labels"))?;
        let mut w = BufWriter::new(File::create(path).map_err(Error::io(&shown))?);
        for l in labels {
            writeln!(w, "{l}").map_err(Error::io(&shown))?;
        }
        w.flush().map_err(Error::io(&shown))
    }

    pub fn to_coo(&self) -> market::CooCounts {
        let mut entries = Vec::new();
        for (j, doc) in self.docs.iter().enumerate() {
            for &(i, v) in doc {
                entries.push((i, j as u32, v));
            }
        }
        market::CooCounts {
            rows: self.vocab.len(),
            cols: self.docs.len(),
            entries,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn doc(&self, i: usize) -> &[(u32, u32)] {
        &self.docs[i]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn doc_total(&self, i: usize) -> u64 {
        self.docs[i].iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        (0..self.docs.len()).map(|i| self.doc_total(i)).sum()
    }

    /// Dense V x B count matrix for the given documents.
    pub fn dense_counts(&self, doc_ids: &[usize]) -> Array2<f64> {
        let v = self.vocab.len();
        let mut x = Array2::zeros((v, doc_ids.len()));
        for (b, &d) in doc_ids.iter().enumerate() {
            for &(w, c) in &self.docs[d] {
                x[[w as usize, b]] = f64::from(c);
            }
        }
        x
    }

    pub fn batch(&self, doc_ids: &[usize]) -> Result<DocBatch> {
        let x = self.dense_counts(doc_ids);
        let xnorm = normalize_batch(&x)?;
        Ok(DocBatch {
            x,
            xnorm,
            doc_ids: doc_ids.to_vec(),
        })
    }

    /// Deterministic shuffled split into (train, test) by document.
    pub fn split(&self, train_fraction: f64, seed_root: u64) -> Result<(BowCorpus, BowCorpus)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::data(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let d = self.docs.len();
        let n_train = (train_fraction * d as f64).floor() as usize;
        if n_train == 0 || n_train == d {
            return Err(Error::data(format!(
                "train fraction {train_fraction} leaves an empty split of {d} documents"
            )));
        }
        let mut ids: Vec<usize> = (0..d).collect();
        let mut rng = seed::rng(seed_root, "corpus/split");
        ids.shuffle(&mut rng);
        let (train_ids, test_ids) = ids.split_at(n_train);
        Ok((self.subset(train_ids)?, self.subset(test_ids)?))
    }

    /// A new corpus containing the listed documents in the given order.
    pub fn subset(&self, doc_ids: &[usize]) -> Result<BowCorpus> {
        let docs: Vec<Vec<(u32, u32)>> = doc_ids.iter().map(|&i| self.docs[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| doc_ids.iter().map(|&i| l[i]).collect());
        BowCorpus::new(self.vocab.clone(), docs, labels)
    }
}

/// Dense view of a batch of documents.
#[derive(Debug, Clone)]
pub struct DocBatch {
    /// Raw counts, V x B.
    pub x: Array2<f64>,
    /// Column-normalized counts, V x B; every column sums to 1.
    pub xnorm: Array2<f64>,
    /// Source document indices, length B.
    pub doc_ids: Vec<usize>,
}

/// Divide every column by its sum. Columns must have positive totals.
pub fn normalize_batch(x: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = x.clone();
    for (b, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let total: f64 = col.sum();
        if total <= 0.0 {
            return Err(Error::data(format!("column {b} has zero total count")));
        }
        col.mapv_inplace(|v| v / total);
    }
    Ok(out)
}

/// One pass over a corpus in batches. Every document appears exactly once;
/// the final batch may be smaller.
pub struct BatchIter<'a> {
    corpus: &'a BowCorpus,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
}

impl<'a> BatchIter<'a> {
    pub fn new(corpus: &'a BowCorpus, batch_size: usize, seed_root: u64, shuffle: bool) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::data("batch size must be positive"));
        }
        if batch_size > corpus.n_docs() {
            return Err(Error::data(format!(
                "batch size {batch_size} exceeds corpus size {}",
                corpus.n_docs()
            )));
        }
        let mut order: Vec<usize> = (0..corpus.n_docs()).collect();
        if shuffle {
            let mut rng = seed::rng(seed_root, "corpus/batch-order");
            order.shuffle(&mut rng);
        }
        Ok(BatchIter {
            corpus,
            order,
            batch_size,
            next: 0,
        })
    }
}

impl Iterator for BatchIter<'_> {
    type Item = DocBatch;

    fn next(&mut self) -> Option<DocBatch> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let ids = &self.order[self.next..end];
        self.next = end;
        // Column totals are >= 1 by corpus construction, so this cannot fail.
        Some(self.corpus.batch(ids).expect("corpus documents are nonempty"))
    }
}
