//! The evaluation protocol: NPMI coherence against a reference corpus,
//! topic diversity, and document clustering by top topic and by k-means,
//! scored with purity and NMI.

pub mod clustering;
pub mod coherence;
pub mod kmeans;

pub use clustering::{nmi, purity, top_topic_assign};
pub use coherence::{
    build_cooccurrence, coherence_curve, npmi_pair, npmi_topic, rank_topics, topic_diversity,
    CooccurrenceStats,
};
pub use kmeans::kmeans;

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::corpus::BowCorpus;
use crate::error::{Error, Result};
use crate::model::TopicModel;

/// Topics with their ranked word lists and coherence scores, ordered by
/// descending NPMI for proportion-based selection.
#[derive(Debug, Clone)]
pub struct TopicSet {
    /// Per-topic ranked token ids (best word first).
    pub word_lists: Vec<Vec<u32>>,
    pub npmi: Vec<f64>,
    /// Topic indices sorted by descending NPMI.
    pub order: Vec<usize>,
}

impl TopicSet {
    /// The ceil(p * K) highest-NPMI topics.
    pub fn select(&self, proportion: f64) -> &[usize] {
        let k = self.order.len();
        let take = ((proportion * k as f64).ceil() as usize).clamp(1, k);
        &self.order[..take]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusteringMode {
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub proportions: Vec<f64>,
    pub kmeans_ks: Vec<usize>,
    pub npmi_top_n: usize,
    pub td_top_n: usize,
    pub smoothing: f64,
    pub kmeans_max_iter: usize,
    pub seed: u64,
    pub clustering: ClusteringMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            proportions: (1..=10).map(|i| i as f64 / 10.0).collect(),
            kmeans_ks: vec![20, 40, 60, 80, 100],
            npmi_top_n: 10,
            td_top_n: 25,
            smoothing: 0.01,
            kmeans_max_iter: 300,
            seed: 1,
            clustering: ClusteringMode::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_topic_npmi: Vec<f64>,
    /// (proportion, mean NPMI over selected topics)
    pub tc_curve: Vec<(f64, f64)>,
    /// (proportion, diversity of selected topics' top words)
    pub td_curve: Vec<(f64, f64)>,
    pub top_purity: Option<f64>,
    pub top_nmi: Option<f64>,
    /// (k, purity, nmi)
    pub km: Vec<(usize, f64, f64)>,
}

/// Run the full protocol on a test corpus with its inferred topic
/// distributions `z` (K x D, one column per document, aligned with the
/// corpus order).
pub fn evaluate(
    model: &TopicModel,
    reference: &BowCorpus,
    z: &Array2<f64>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if z.ncols() != reference.n_docs() {
        return Err(Error::data(format!(
            "{} topic columns for {} documents",
            z.ncols(),
            reference.n_docs()
        )));
    }
    let topic_set = build_topic_set(model, reference, opts)?;
    let tc_curve = coherence_curve(&topic_set.npmi, &opts.proportions)?;

    let td_lists: Vec<Vec<u32>> = model_top_lists(model, opts.td_top_n)?;
    let mut td_curve = Vec::with_capacity(opts.proportions.len());
    for &p in &opts.proportions {
        let selected = topic_set.select(p);
        let lists: Vec<Vec<u32>> = selected.iter().map(|&t| td_lists[t].clone()).collect();
        td_curve.push((p, topic_diversity(&lists)?));
    }

    let want_clustering = match opts.clustering {
        ClusteringMode::On => {
            if reference.labels().is_none() {
                return Err(Error::data(
                    "clustering metrics requested but the corpus has no labels",
                ));
            }
            true
        }
        ClusteringMode::Auto => reference.labels().is_some(),
        ClusteringMode::Off => false,
    };

    let (top_purity, top_nmi, km) = if want_clustering {
        let labels = reference.labels().expect("checked above");
        let assignment = top_topic_assign(z);
        let tp = purity(&assignment, labels)?;
        let tn = nmi(&assignment, labels)?;
        let mut km = Vec::with_capacity(opts.kmeans_ks.len());
        for &k in &opts.kmeans_ks {
            let a = kmeans(z, k, crate::seed::derive(opts.seed, &format!("eval/kmeans-{k}")), opts.kmeans_max_iter)?;
            km.push((k, purity(&a, labels)?, nmi(&a, labels)?));
        }
        (Some(tp), Some(tn), km)
    } else {
        (None, None, Vec::new())
    };

    Ok(EvalReport {
        per_topic_npmi: topic_set.npmi,
        tc_curve,
        td_curve,
        top_purity,
        top_nmi,
        km,
    })
}

fn model_top_lists(model: &TopicModel, n: usize) -> Result<Vec<Vec<u32>>> {
    let k = model.topics.n_topics();
    let n = n.min(model.vocab.len());
    (0..k)
        .map(|t| {
            model
                .top_words(t, n)
                .map(|ranked| ranked.into_iter().map(|(w, _)| w).collect())
        })
        .collect()
}

/// Rank every topic's words, score coherence on the reference corpus, and
/// order topics by NPMI.
pub fn build_topic_set(
    model: &TopicModel,
    reference: &BowCorpus,
    opts: &EvalOptions,
) -> Result<TopicSet> {
    let word_lists = model_top_lists(model, opts.npmi_top_n)?;
    let interest: BTreeSet<u32> = word_lists.iter().flatten().copied().collect();
    let stats = build_cooccurrence(reference, &interest);
    let npmi: Vec<f64> = word_lists
        .iter()
        .map(|words| npmi_topic(words, &stats, opts.smoothing))
        .collect::<Result<_>>()?;
    let order = rank_topics(&npmi);
    Ok(TopicSet {
        word_lists,
        npmi,
        order,
    })
}


/// Render a report as the plot-ready text format: key = value pairs in
/// `[summary]`/`[clustering/top]`, tab-separated blocks elsewhere, columns
/// exactly as written in the header lines.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("[coherence]\n");
    out.push_str("proportion\tmean_npmi\n");
    for (p, v) in &report.tc_curve {
        out.push_str(&format!("{p}\t{v}\n"));
    }
    out.push_str("\n[diversity]\n");
    out.push_str("proportion\ttd\n");
    for (p, v) in &report.td_curve {
        out.push_str(&format!("{p}\t{v}\n"));
    }
    out.push_str("\n[topics]\n");
    out.push_str("topic\tnpmi\n");
    for (t, v) in report.per_topic_npmi.iter().enumerate() {
        out.push_str(&format!("{t}\t{v}\n"));
    }
    if let (Some(tp), Some(tn)) = (report.top_purity, report.top_nmi) {
        out.push_str("\n[clustering/top]\n");
        out.push_str(&format!("top_purity = {tp}\n"));
        out.push_str(&format!("top_nmi = {tn}\n"));
    }
    if !report.km.is_empty() {
        out.push_str("\n[clustering/kmeans]\n");
        out.push_str("k\tpurity\tnmi\n");
        for (k, p, n) in &report.km {
            out.push_str(&format!("{k}\t{p}\t{n}\n"));
        }
    }
    out
}
