//! Topic coherence (NPMI over document co-occurrence) and topic diversity.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::BowCorpus;
use crate::error::{Error, Result};

/// Document frequencies for a tracked word set, plus joint document
/// frequencies for every pair inside it.
#[derive(Debug, Clone)]
pub struct CooccurrenceStats {
    tracked: BTreeSet<u32>,
    df: HashMap<u32, u32>,
    pair_df: HashMap<(u32, u32), u32>,
    pub n_docs: usize,
}

impl CooccurrenceStats {
    pub fn df(&self, w: u32) -> u32 {
        self.df.get(&w).copied().unwrap_or(0)
    }

    pub fn pair_df(&self, a: u32, b: u32) -> u32 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.pair_df.get(&key).copied().unwrap_or(0)
    }

    pub fn tracks(&self, w: u32) -> bool {
        self.tracked.contains(&w)
    }

    /// Build stats directly from counts; the test-facing constructor.
    pub fn from_counts(
        n_docs: usize,
        df: HashMap<u32, u32>,
        pair_df: HashMap<(u32, u32), u32>,
    ) -> Self {
        let tracked = df.keys().copied().collect();
        CooccurrenceStats {
            tracked,
            df,
            pair_df,
            n_docs,
        }
    }
}

/// Binary document-level co-occurrence counts over `words_of_interest`.
pub fn build_cooccurrence(reference: &BowCorpus, words_of_interest: &BTreeSet<u32>) -> CooccurrenceStats {
    let mut df: HashMap<u32, u32> = HashMap::new();
    let mut pair_df: HashMap<(u32, u32), u32> = HashMap::new();
    for d in 0..reference.n_docs() {
        let present: Vec<u32> = reference
            .doc(d)
            .iter()
            .map(|&(w, _)| w)
            .filter(|w| words_of_interest.contains(w))
            .collect();
        for &w in &present {
            *df.entry(w).or_insert(0) += 1;
        }
        for i in 0..present.len() {
            for j in (i + 1)..present.len() {
                let key = (present[i], present[j]); // doc words are sorted
                *pair_df.entry(key).or_insert(0) += 1;
            }
        }
    }
    CooccurrenceStats {
        tracked: words_of_interest.clone(),
        df,
        pair_df,
        n_docs: reference.n_docs(),
    }
}

/// NPMI of one word pair with additive smoothing on the counts:
/// p = (count + smoothing) / n_docs for both singles and pairs.
pub fn npmi_pair(stats: &CooccurrenceStats, a: u32, b: u32, smoothing: f64) -> Result<f64> {
    for w in [a, b] {
        if !stats.tracks(w) {
            return Err(Error::data(format!(
                "word {w} is not covered by the co-occurrence statistics"
            )));
        }
    }
    let d = stats.n_docs as f64;
    let pa = (stats.df(a) as f64 + smoothing) / d;
    let pb = (stats.df(b) as f64 + smoothing) / d;
    let pab = (stats.pair_df(a, b) as f64 + smoothing) / d;
    if pab == 0.0 {
        // Unsmoothed and never co-occurring: the NPMI limit is -1.
        return Ok(-1.0);
    }
    let pmi = (pab / (pa * pb)).ln();
    let denom = -pab.ln();
    if denom == 0.0 {
        // p(a,b) = 1 forces p(a) = p(b) = 1; the limit value is 1.
        return Ok(1.0);
    }
    Ok(pmi / denom)
}

/// Mean NPMI over all unordered pairs of a topic's top words.
pub fn npmi_topic(top_words: &[u32], stats: &CooccurrenceStats, smoothing: f64) -> Result<f64> {
    if top_words.len() < 2 {
        return Err(Error::data("topic coherence needs at least two words"));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..top_words.len() {
        for j in (i + 1)..top_words.len() {
            sum += npmi_pair(stats, top_words[i], top_words[j], smoothing)?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Per-topic NPMI ranked best-first; ties keep the lower topic index first.
pub fn rank_topics(per_topic_npmi: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..per_topic_npmi.len()).collect();
    order.sort_by(|&a, &b| per_topic_npmi[b].total_cmp(&per_topic_npmi[a]).then(a.cmp(&b)));
    order
}

/// Mean NPMI over the ceil(p * K) best topics, one point per proportion.
pub fn coherence_curve(per_topic_npmi: &[f64], proportions: &[f64]) -> Result<Vec<(f64, f64)>> {
    let k = per_topic_npmi.len();
    if k == 0 {
        return Err(Error::data("no topics to evaluate"));
    }
    for &p in proportions {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::data(format!("selection proportion {p} outside (0, 1]")));
        }
    }
    let order = rank_topics(per_topic_npmi);
    let mut out = Vec::with_capacity(proportions.len());
    for &p in proportions {
        let take = ((p * k as f64).ceil() as usize).clamp(1, k);
        let mean: f64 =
            order[..take].iter().map(|&t| per_topic_npmi[t]).sum::<f64>() / take as f64;
        out.push((p, mean));
    }
    Ok(out)
}

/// Fraction of unique words across the selected topics' top-word lists.
pub fn topic_diversity(top_word_lists: &[Vec<u32>]) -> Result<f64> {
    if top_word_lists.is_empty() {
        return Err(Error::data("topic diversity needs at least one topic"));
    }
    let total: usize = top_word_lists.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::data("topic diversity over empty word lists"));
    }
    let unique: BTreeSet<u32> = top_word_lists.iter().flatten().copied().collect();
    Ok(unique.len() as f64 / total as f64)
}
