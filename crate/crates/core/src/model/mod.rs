//! The topic model: encoder, virtual decoder, joint loss, manual
//! backpropagation, Adam, the training loop, inference, and topic export.

pub mod adam;
pub mod artifact;
pub mod encoder;
pub mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use encoder::{encoder_backward, DropoutConfig, EncoderCache, EncoderGrads, EncoderParams};
pub use loss::{joint_loss, loss_backward, virtual_decoder, LossBreakdown};

use std::time::Instant;

use ndarray::Array2;

use crate::corpus::{BatchIter, BowCorpus, Vocabulary};
use crate::embeddings::{
    cost_matrix, cost_matrix_grad_g, init_topic_embeddings, CostMatrix, TopicEmbeddings,
    WordEmbeddings,
};
use crate::error::{Error, Result};
use crate::ot::SinkhornConfig;
use crate::seed;

/// Everything that shapes a training run. Defaults follow the reference
/// setup this model ships with: 100 topics, a 200-unit hidden layer,
/// alpha 20, epsilon 0.07, Adam at 0.001, batches of 200, 50 epochs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub n_topics: usize,
    pub hidden: usize,
    pub epsilon: f64,
    pub sinkhorn: SinkhornConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub dropout: DropoutConfig,
    pub bn_momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_topics: 100,
            hidden: 200,
            epsilon: 0.07,
            sinkhorn: SinkhornConfig::default(),
            adam: AdamConfig::default(),
            batch_size: 200,
            epochs: 50,
            seed: 1,
            dropout: DropoutConfig::default(),
            bn_momentum: 0.99,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 {
            return Err(Error::data("topic count must be positive"));
        }
        if self.hidden == 0 {
            return Err(Error::data("hidden size must be positive"));
        }
        if self.epsilon < 0.0 {
            return Err(Error::data("epsilon must be nonnegative"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::data("learning rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::data("epoch count must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::data(
                "batch size must be at least 2 (batch statistics need variance)",
            ));
        }
        self.sinkhorn.validate()?;
        self.dropout.validate()?;
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::data("batch-norm momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-epoch training diagnostics. Wall time is kept apart from the loss
/// fields so persisted logs stay run-to-run reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub total_loss: f64,
    pub likelihood: f64,
    pub sinkhorn: f64,
    /// Mean transport cost over every training document this epoch.
    pub mean_sinkhorn_distance: f64,
}

/// A trained model: the encoder, the learned topic embeddings, and the
/// frozen word embeddings they were trained against. Immutable once built;
/// safe to share for concurrent inference.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub encoder: EncoderParams,
    pub topics: TopicEmbeddings,
    pub words: WordEmbeddings,
    pub vocab: Vocabulary,
    pub train_log: Vec<EpochStats>,
    pub config: TrainConfig,
}

impl TopicModel {
    /// The cost matrix implied by the current topic embeddings. Recomputed
    /// on every call so it can never go stale against `topics`.
    pub fn cost_matrix(&self) -> Result<CostMatrix> {
        cost_matrix(&self.words, &self.topics)
    }

    /// Topic distributions for a batch of normalized documents
    /// (inference mode: no dropout, running batch-norm statistics).
    pub fn infer(&self, xnorm: &Array2<f64>) -> Result<Array2<f64>> {
        if xnorm.nrows() != self.vocab.len() {
            return Err(Error::data(format!(
                "input has {} rows, model vocabulary has {}",
                xnorm.nrows(),
                self.vocab.len()
            )));
        }
        self.encoder.forward_infer(xnorm)
    }

    /// The `n` tokens closest to topic `k` in cost order, cheapest first;
    /// ties broken by vocabulary id.
    pub fn top_words(&self, topic: usize, n: usize) -> Result<Vec<(u32, f64)>> {
        let k = self.topics.n_topics();
        if topic >= k {
            return Err(Error::data(format!("topic {topic} outside 0..{k}")));
        }
        if n > self.vocab.len() {
            return Err(Error::data(format!(
                "requested {n} words from a vocabulary of {}",
                self.vocab.len()
            )));
        }
        let m = self.cost_matrix()?;
        let col = m.matrix().column(topic);
        let mut ranked: Vec<(u32, f64)> = col
            .iter()
            .enumerate()
            .map(|(v, &cost)| (v as u32, cost))
            .collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        ranked.truncate(n);
        Ok(ranked)
    }
}

/// Per-epoch progress callback: receives the stats and the epoch wall time.
pub type EpochHook<'h> = dyn FnMut(&EpochStats, f64) + 'h;

/// Train a model with the full loop: shuffled batches, a fresh cost matrix
/// per step, forward, joint loss, manual backward, Adam on the encoder and
/// topic embeddings jointly. Deterministic for a fixed config and seed.
pub fn train(corpus: &BowCorpus, words: &WordEmbeddings, cfg: &TrainConfig) -> Result<TopicModel> {
    train_with_hook(corpus, words, cfg, &mut |_, _| {})
}

pub fn train_with_hook(
    corpus: &BowCorpus,
    words: &WordEmbeddings,
    cfg: &TrainConfig,
    on_epoch: &mut EpochHook,
) -> Result<TopicModel> {
    cfg.validate()?;
    let v = corpus.vocab_size();
    if v < 8 {
        return Err(Error::data(format!(
            "vocabulary has {v} tokens; training requires at least 8"
        )));
    }
    if words.vocab_size() != v {
        return Err(Error::data(format!(
            "word embeddings cover {} tokens, corpus vocabulary has {v}",
            words.vocab_size()
        )));
    }
    let d = corpus.n_docs();
    if cfg.batch_size > d {
        return Err(Error::data(format!(
            "batch size {} exceeds corpus size {d}",
            cfg.batch_size
        )));
    }
    if d % cfg.batch_size == 1 {
        return Err(Error::data(format!(
            "batch size {} leaves a final batch of one document, which has no \
             batch statistics; adjust the batch size",
            cfg.batch_size
        )));
    }

    let mut encoder = EncoderParams::init(
        v,
        cfg.hidden,
        cfg.n_topics,
        cfg.dropout,
        cfg.bn_momentum,
        cfg.seed,
    );
    let mut topics = init_topic_embeddings(cfg.n_topics, words.dim(), cfg.seed);
    let mut adam_state = AdamState::new(&encoder, topics.matrix());

    let mut train_log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let batch_seed = seed::derive(cfg.seed, &format!("train/epoch-{epoch}"));
        let batches = BatchIter::new(corpus, cfg.batch_size, batch_seed, true)?;

        let mut cost_sum = 0.0;
        let mut lik_sum = 0.0;
        let mut docs_seen = 0usize;
        for (bi, batch) in batches.enumerate() {
            let mut step = || -> Result<(f64, f64)> {
                let m = cost_matrix(words, &topics)?;
                let dropout_seed =
                    seed::derive(cfg.seed, &format!("train/dropout/{epoch}/{bi}"));
                let (z, enc_cache) = encoder.forward_train(&batch.xnorm, dropout_seed)?;
                let (breakdown, state) =
                    joint_loss(&batch.xnorm, &z, m.matrix(), cfg.epsilon, &cfg.sinkhorn)?;
                let (dz, dm) = loss_backward(&state, cfg.epsilon)?;
                let enc_grads = encoder_backward(&encoder, &enc_cache, &dz)?;
                let g_grad = cost_matrix_grad_g(words, &topics, &dm)?;
                adam_step(
                    &mut encoder,
                    topics.matrix_mut(),
                    &enc_grads,
                    &g_grad,
                    &mut adam_state,
                    &cfg.adam,
                )?;
                topics.rescue_zero_columns(
                    cfg.seed,
                    &format!("train/rescue/{epoch}/{bi}"),
                );
                Ok((breakdown.per_doc_cost.sum(), breakdown.per_doc_likelihood.sum()))
            };
            let (batch_cost, batch_lik) = step().map_err(|e| {
                Error::numerical(format!("epoch {epoch}, batch {bi}: {e}"))
            })?;
            cost_sum += batch_cost;
            lik_sum += batch_lik;
            docs_seen += batch.doc_ids.len();
        }

        let df = docs_seen as f64;
        let sinkhorn = cost_sum / df;
        let likelihood = lik_sum / df;
        let stats = EpochStats {
            epoch,
            total_loss: sinkhorn - cfg.epsilon * likelihood,
            likelihood,
            sinkhorn,
            mean_sinkhorn_distance: sinkhorn,
        };
        on_epoch(&stats, started.elapsed().as_secs_f64());
        train_log.push(stats);
    }

    Ok(TopicModel {
        encoder,
        topics,
        words: words.clone(),
        vocab: corpus.vocab().clone(),
        train_log,
        config: cfg.clone(),
    })
}
