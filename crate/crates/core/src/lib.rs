//! Optimal-transport topic modeling.
//!
//! A document carries two distributions over different supports: the
//! normalized word counts and a latent distribution over topics produced by
//! an encoder network. Training pushes the two together by minimizing the
//! entropically smoothed transport cost between them under a cost matrix of
//! cosine distances between fixed pretrained word embeddings and learnable
//! topic embeddings, combined with a reconstruction likelihood through a
//! softmax decoder that the cost matrix itself defines.
//!
//! The crate is organized by role:
//! - [`corpus`]: bag-of-words loading, validation, batching, splits;
//! - [`embeddings`]: pretrained word vectors, topic vectors, the cost matrix;
//! - [`ot`]: exact and Sinkhorn transport, with gradients through the loop;
//! - [`model`]: encoder, loss, manual backpropagation, Adam, training;
//! - [`eval`]: coherence, diversity, and document-clustering metrics;
//! - [`verify`]: randomized property suites behind the `verify` command.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod model;
pub mod ot;
pub mod seed;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};
