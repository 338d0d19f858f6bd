use std::path::PathBuf;

use clap::Args;
use ottm_core::embeddings::load_word_vectors;
use ottm_core::model::{artifact, train_with_hook};
use ottm_core::seed;

use crate::{CliError, ConfigArgs};

#[derive(Args)]
pub struct TrainArgs {
    /// Matrix Market counts of the corpus to train on.
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary file matching the counts.
    #[arg(long)]
    vocab: PathBuf,
    /// Pretrained word vectors (text layout: token followed by the values).
    #[arg(long)]
    embeddings: PathBuf,
    /// Optional per-document labels; carried into the held-out split.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output model directory; must not exist yet.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = args.config.build()?;
    if args.out.exists() {
        return Err(CliError::Usage(format!(
            "output directory {} already exists",
            args.out.display()
        )));
    }

    let corpus = super::load_corpus(&args.corpus, &args.vocab, args.labels.as_deref())?;
    let (words, oov) = load_word_vectors(
        &args.embeddings,
        corpus.vocab(),
        cfg.embedding_dim,
        seed::derive(cfg.seed, "cli/oov"),
    )?;
    if oov > 0 {
        eprintln!(
            "{oov} of {} vocabulary tokens missing from the vector file; \
             filled with seeded random vectors",
            corpus.vocab_size()
        );
    }

    let (train_part, test_part) = if cfg.train_fraction < 1.0 {
        let (a, b) = corpus.split(cfg.train_fraction, cfg.seed)?;
        (a, Some(b))
    } else {
        (corpus, None)
    };

    // Stage the whole artifact and rename at the end: a failed run must
    // not leave a half-written model directory behind.
    let staging = args.out.with_extension("staging");
    if staging.exists() {
        std::fs::remove_dir_all(&staging)
            .map_err(|e| CliError::Data(format!("{}: {e}", staging.display())))?;
    }
    std::fs::create_dir_all(&staging)
        .map_err(|e| CliError::Data(format!("{}: {e}", staging.display())))?;

    let result = (|| -> Result<(), CliError> {
        let train_cfg = cfg.train_config();
        let epochs = train_cfg.epochs;
        let model = train_with_hook(&train_part, &words, &train_cfg, &mut |stats, wall| {
            eprintln!(
                "epoch {}/{epochs}  total = {:.6}  likelihood = {:.6}  sinkhorn = {:.6}  \
                 mean_sinkhorn_distance = {:.6}  wall = {:.2}s",
                stats.epoch,
                stats.total_loss,
                stats.likelihood,
                stats.sinkhorn,
                stats.mean_sinkhorn_distance,
                wall
            );
        })?;
        artifact::save_model(&model, &staging)?;
        if let Some(test) = &test_part {
            test.save_counts(&staging.join("test_counts.mm"))?;
            if test.labels().is_some() {
                test.save_labels(&staging.join("test_labels.txt"))?;
            }
        }
        cfg.write_echo(&staging)?;
        Ok(())
    })();

    match result {
        Ok(()) => {
            std::fs::rename(&staging, &args.out)
                .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
            println!("model written to {}", args.out.display());
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}
