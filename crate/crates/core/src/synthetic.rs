//! Planted-topic corpus generation.
//!
//! Builds a corpus whose ground truth is known by construction: topic
//! centers in embedding space, words drawn tightly around their center, and
//! documents sampled from per-document topic mixtures. Labels carry each
//! document's dominant mixture component, so recovery can be scored
//! against the generator itself.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::corpus::{BowCorpus, Vocabulary};
use crate::embeddings::WordEmbeddings;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_topics: usize,
    pub words_per_topic: usize,
    pub embedding_dim: usize,
    pub n_docs: usize,
    pub doc_len: usize,
    /// Concentration of the per-document topic mixture.
    pub dirichlet_alpha: f64,
    /// Upper bound on pairwise |cosine| between topic centers.
    pub center_max_cos: f64,
    /// Lower bound on cosine between a word and its topic center.
    pub word_min_cos: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_topics: 5,
            words_per_topic: 20,
            embedding_dim: 16,
            n_docs: 2000,
            doc_len: 50,
            dirichlet_alpha: 0.2,
            center_max_cos: 0.2,
            word_min_cos: 0.9,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// Labeled corpus; the label is the document's dominant topic: the
    /// component that generated the most of its tokens (ties to the lowest
    /// index). Unlike the mixture argmax, this is a property of the
    /// realized document, so an ideal model can recover it exactly.
    pub corpus: BowCorpus,
    pub embeddings: WordEmbeddings,
    /// Planted topic centers, dim x n_topics, unit columns.
    pub centers: Array2<f64>,
    /// Per-document mixture weights, n_topics x n_docs.
    pub mixtures: Array2<f64>,
}

fn normalize(v: &mut Array1<f64>) {
    let n = v.dot(v).sqrt();
    v.mapv_inplace(|x| x / n);
}

/// Generate the corpus. Deterministic for a fixed config.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    let l = cfg.embedding_dim;
    let t = cfg.n_topics;
    if t > l {
        return Err(Error::data(format!(
            "cannot place {t} near-orthogonal centers in dimension {l}"
        )));
    }
    if cfg.n_docs == 0 || cfg.doc_len == 0 || cfg.words_per_topic == 0 {
        return Err(Error::data("empty synthetic configuration"));
    }

    let mut rng = seed::rng(cfg.seed, "synthetic/centers");
    // Gram-Schmidt on Gaussian draws: orthonormal centers, pairwise cosine 0.
    let mut centers = Array2::zeros((l, t));
    for k in 0..t {
        loop {
            let mut v: Array1<f64> =
                Array1::from_shape_simple_fn(l, || StandardNormal.sample(&mut rng));
            for prev in 0..k {
                let p = centers.column(prev).to_owned();
                let proj = v.dot(&p);
                v -= &(&p * proj);
            }
            if v.dot(&v).sqrt() > 1e-6 {
                normalize(&mut v);
                centers.column_mut(k).assign(&v);
                break;
            }
        }
    }
    debug_assert!(pairwise_cos_ok(&centers, cfg.center_max_cos));

    // One tight cloud of word vectors around each center.
    let v_total = t * cfg.words_per_topic;
    let mut e = Array2::zeros((l, v_total));
    let mut word_rng = seed::rng(cfg.seed, "synthetic/words");
    let noise_scale = 0.05;
    for k in 0..t {
        let center = centers.column(k).to_owned();
        for w in 0..cfg.words_per_topic {
            let vid = k * cfg.words_per_topic + w;
            loop {
                let mut v = center.clone();
                for x in v.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut word_rng);
                    *x += noise_scale * g;
                }
                normalize(&mut v);
                if v.dot(&center) >= cfg.word_min_cos {
                    e.column_mut(vid).assign(&v);
                    break;
                }
            }
        }
    }

    let tokens: Vec<String> = (0..t)
        .flat_map(|k| (0..cfg.words_per_topic).map(move |w| format!("t{k}_w{w}")))
        .collect();
    let vocab = Vocabulary::from_tokens(tokens)?;

    // Documents: mixture over topics, tokens drawn topic-then-word.
    let mut doc_rng = seed::rng(cfg.seed, "synthetic/docs");
    let gamma = Gamma::new(cfg.dirichlet_alpha, 1.0)
        .map_err(|e| Error::data(format!("bad Dirichlet concentration: {e}")))?;
    let mut docs: Vec<Vec<(u32, u32)>> = Vec::with_capacity(cfg.n_docs);
    let mut labels = Vec::with_capacity(cfg.n_docs);
    let mut mixtures = Array2::zeros((t, cfg.n_docs));
    for d in 0..cfg.n_docs {
        // Dirichlet via normalized Gamma draws.
        let mut pi: Vec<f64> = (0..t).map(|_| gamma.sample(&mut doc_rng)).collect();
        let mut total: f64 = pi.iter().sum();
        if total == 0.0 {
            // Extremely sparse concentration can underflow every draw.
            pi = vec![1.0 / t as f64; t];
            total = 1.0;
        }
        for p in pi.iter_mut() {
            *p /= total;
        }
        for (k, &p) in pi.iter().enumerate() {
            mixtures[[k, d]] = p;
        }

        let mut counts = std::collections::BTreeMap::new();
        let mut topic_tokens = vec![0u32; t];
        for _ in 0..cfg.doc_len {
            let topic = sample_categorical(&pi, &mut doc_rng);
            let word = doc_rng.random_range(0..cfg.words_per_topic);
            let vid = (topic * cfg.words_per_topic + word) as u32;
            *counts.entry(vid).or_insert(0u32) += 1;
            topic_tokens[topic] += 1;
        }
        let label = topic_tokens
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i as u32)
            .unwrap_or(0);
        docs.push(counts.into_iter().collect());
        labels.push(label);
    }

    Ok(SyntheticCorpus {
        corpus: BowCorpus::new(vocab, docs, Some(labels))?,
        embeddings: WordEmbeddings::from_matrix(e)?,
        centers,
        mixtures,
    })
}

fn sample_categorical(p: &[f64], rng: &mut impl Rng) -> usize {
    let mut target: f64 = rng.random::<f64>();
    for (i, &w) in p.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    p.len() - 1
}

fn pairwise_cos_ok(centers: &Array2<f64>, max_cos: f64) -> bool {
    let t = centers.ncols();
    for a in 0..t {
        for b in (a + 1)..t {
            let cos = centers.column(a).dot(&centers.column(b));
            if cos.abs() > max_cos + 1e-9 {
                return false;
            }
        }
    }
    true
}
