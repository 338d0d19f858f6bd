pub mod eval;
pub mod infer;
pub mod ingest;
pub mod topics;
pub mod train;
pub mod verify;

use std::path::Path;

use ottm_core::corpus::{BowCorpus, Vocabulary};

use crate::CliError;

/// Load a corpus from a counts file plus vocabulary, with optional labels.
pub fn load_corpus(
    counts: &Path,
    vocab: &Path,
    labels: Option<&Path>,
) -> Result<BowCorpus, CliError> {
    let vocab = Vocabulary::load(vocab)?;
    let mut corpus = BowCorpus::load(counts, vocab)?;
    if let Some(labels) = labels {
        corpus.load_labels(labels)?;
    }
    Ok(corpus)
}
