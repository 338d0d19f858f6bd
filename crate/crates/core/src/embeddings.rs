//! Word and topic embeddings and the cosine cost matrix between them.
//!
//! Word embeddings are loaded once from a pretrained text file and never
//! updated. Topic embeddings are the learnable side; the cost matrix entry
//! for word v and topic k is one minus their cosine similarity, so costs
//! always lie in [0, 2].

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::seed;

/// Fixed pretrained word vectors, one column per vocabulary entry (L x V).
#[derive(Debug, Clone)]
pub struct WordEmbeddings {
    e: Array2<f64>,
}

impl WordEmbeddings {
    pub fn from_matrix(e: Array2<f64>) -> Result<Self> {
        for (v, col) in e.columns().into_iter().enumerate() {
            if norm(&col) == 0.0 {
                return Err(Error::data(format!("word embedding column {v} has zero norm")));
            }
        }
        Ok(WordEmbeddings { e })
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.e.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.e
    }

    pub fn vector(&self, v: usize) -> ArrayView1<'_, f64> {
        self.e.column(v)
    }
}

/// Learnable topic vectors, one column per topic (L x K).
#[derive(Debug, Clone)]
pub struct TopicEmbeddings {
    g: Array2<f64>,
}

impl TopicEmbeddings {
    pub fn from_matrix(g: Array2<f64>) -> Self {
        TopicEmbeddings { g }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_topics(&self) -> usize {
        self.g.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.g
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<f64> {
        &mut self.g
    }

    /// Replace any column that has collapsed to exactly zero norm, which
    /// would make the cosine undefined. Returns how many were re-drawn.
    pub fn rescue_zero_columns(&mut self, seed_root: u64, tag: &str) -> usize {
        let mut fixed = 0;
        for k in 0..self.g.ncols() {
            if norm(&self.g.column(k)) == 0.0 {
                let mut rng = seed::rng(seed_root, &format!("{tag}/column-{k}"));
                for x in self.g.column_mut(k).iter_mut() {
                    *x = rng.random_range(-0.1..0.1);
                }
                fixed += 1;
            }
        }
        fixed
    }
}

/// V x K matrix of cosine distances, entries in [0, 2].
#[derive(Debug, Clone)]
pub struct CostMatrix {
    m: Array2<f64>,
}

impl CostMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.m
    }

    /// For tests and synthetic setups that construct costs directly.
    pub fn from_matrix(m: Array2<f64>) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if m.iter().any(|&v| !(-SLACK..=2.0 + SLACK).contains(&v)) {
            return Err(Error::data("cost entries must lie in [0, 2]"));
        }
        Ok(CostMatrix { m })
    }
}

fn norm(v: &ArrayView1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Cosine similarity, clamped to [-1, 1] against floating drift.
pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    let na = norm(&a);
    let nb = norm(&b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::numerical("cosine of a zero-norm vector"));
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Load pretrained vectors in the usual text layout: `token v1 ... vL`.
///
/// Vocabulary tokens missing from the file (and zero-norm file vectors) are
/// filled from a seeded uniform(-0.1, 0.1) draw; the fill count is returned
/// so callers can report coverage.
pub fn load_word_vectors(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    oov_seed: u64,
) -> Result<(WordEmbeddings, usize)> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(Error::io(&shown))?;

    let v = vocab.len();
    let mut e = Array2::<f64>::zeros((dim, v));
    let mut filled = vec![false; v];

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(Error::io(&shown))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::parse(&shown, lineno, "missing token"))?;
        let id = match vocab.id(token) {
            Some(id) => id as usize,
            None => {
                // Still validate the arity so format errors never pass silently.
                let n = fields.count();
                if n != dim {
                    return Err(Error::parse(
                        &shown,
                        lineno,
                        format!("expected {dim} values, found {n}"),
                    ));
                }
                continue;
            }
        };
        let mut values = Vec::with_capacity(dim);
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                Error::parse(&shown, lineno, format!("unreadable number `{field}`"))
            })?;
            values.push(value);
        }
        if values.len() != dim {
            return Err(Error::parse(
                &shown,
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        // First occurrence wins when a file repeats a token.
        if !filled[id] {
            for (row, value) in values.into_iter().enumerate() {
                e[[row, id]] = value;
            }
            filled[id] = true;
        }
    }

    let mut oov = 0usize;
    for id in 0..v {
        let zero_norm = norm(&e.column(id)) == 0.0;
        if !filled[id] || zero_norm {
            let mut rng = seed::rng(oov_seed, &format!("embeddings/oov/{}", vocab.token(id as u32)));
            for x in e.column_mut(id).iter_mut() {
                *x = rng.random_range(-0.1..0.1);
            }
            oov += 1;
        }
    }

    Ok((WordEmbeddings::from_matrix(e)?, oov))
}

/// Seeded uniform(-0.1, 0.1) topic embedding initialization.
pub fn init_topic_embeddings(k: usize, dim: usize, seed_root: u64) -> TopicEmbeddings {
    let mut rng = seed::rng(seed_root, "embeddings/topic-init");
    let g = Array2::from_shape_simple_fn((dim, k), || rng.random_range(-0.1..0.1));
    TopicEmbeddings::from_matrix(g)
}

/// m[v][k] = 1 - cos(e_v, g_k).
pub fn cost_matrix(words: &WordEmbeddings, topics: &TopicEmbeddings) -> Result<CostMatrix> {
    if words.dim() != topics.dim() {
        return Err(Error::data(format!(
            "embedding dimensions differ: words {} vs topics {}",
            words.dim(),
            topics.dim()
        )));
    }
    let e = words.matrix();
    let g = topics.matrix();
    let (v, k) = (e.ncols(), g.ncols());

    let e_norms: Vec<f64> = (0..v).map(|i| norm(&e.column(i))).collect();
    let mut g_norms = Vec::with_capacity(k);
    for j in 0..k {
        let n = norm(&g.column(j));
        if n == 0.0 {
            return Err(Error::data(format!("topic embedding column {j} has zero norm")));
        }
        g_norms.push(n);
    }

    // E^T G gives all inner products in one multiply.
    let inner = e.t().dot(g);
    let mut m = Array2::zeros((v, k));
    for i in 0..v {
        for j in 0..k {
            let cos = (inner[[i, j]] / (e_norms[i] * g_norms[j])).clamp(-1.0, 1.0);
            m[[i, j]] = 1.0 - cos;
        }
    }
    Ok(CostMatrix { m })
}

/// Pull an upstream V x K cost gradient back to the topic embeddings.
///
/// d m_vk / d g_k = -( e_v / (|e_v||g_k|) - cos(e_v, g_k) g_k / |g_k|^2 ).
pub fn cost_matrix_grad_g(
    words: &WordEmbeddings,
    topics: &TopicEmbeddings,
    upstream: &Array2<f64>,
) -> Result<Array2<f64>> {
    let e = words.matrix();
    let g = topics.matrix();
    let (l, v, k) = (e.nrows(), e.ncols(), g.ncols());
    if upstream.dim() != (v, k) {
        return Err(Error::data(format!(
            "upstream gradient is {:?}, expected ({v}, {k})",
            upstream.dim()
        )));
    }
    if words.dim() != topics.dim() {
        return Err(Error::data("embedding dimensions differ"));
    }

    let e_norms: Vec<f64> = (0..v).map(|i| norm(&e.column(i))).collect();
    let inner = e.t().dot(g);

    let mut grad = Array2::<f64>::zeros((l, k));
    for j in 0..k {
        let gj = g.column(j);
        let gn = norm(&gj);
        if gn == 0.0 {
            return Err(Error::data(format!("topic embedding column {j} has zero norm")));
        }
        // Split the sum over words into one E-weighted combination and one
        // scalar multiple of g_k:
        //   dL/dg_k = -(1/|g_k|) E (u_k / |e|) + (g_k / |g_k|^2) sum_v u_vk cos_vk
        let mut e_weights = Vec::with_capacity(v);
        let mut cos_sum = 0.0;
        for i in 0..v {
            let u = upstream[[i, j]];
            let cos = (inner[[i, j]] / (e_norms[i] * gn)).clamp(-1.0, 1.0);
            e_weights.push(u / e_norms[i]);
            cos_sum += u * cos;
        }
        for row in 0..l {
            let mut acc = 0.0;
            for i in 0..v {
                acc += e[[row, i]] * e_weights[i];
            }
            grad[[row, j]] = -(acc / gn) + gj[row] * cos_sum / (gn * gn);
        }
    }
    Ok(grad)
}
