use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use ottm_core::corpus::Vocabulary;
use ottm_core::model::artifact;

use crate::{CliError, ConfigArgs};

#[derive(Args)]
pub struct InferArgs {
    /// Trained model directory.
    #[arg(long)]
    model: PathBuf,
    /// Matrix Market counts of the documents to infer.
    #[arg(long)]
    corpus: PathBuf,
    /// Optional vocabulary to cross-check against the model's.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Output file: one document per row, K tab-separated probabilities.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

pub fn run(args: &InferArgs) -> Result<(), CliError> {
    let cfg = args.config.build()?;
    let model = artifact::load_model(&args.model)?;

    if let Some(vocab_path) = &args.vocab {
        let vocab = Vocabulary::load(vocab_path)?;
        if vocab != model.vocab {
            return Err(CliError::Data(format!(
                "vocabulary {} does not match the model's vocabulary",
                vocab_path.display()
            )));
        }
    }
    let corpus = ottm_core::corpus::BowCorpus::load(&args.corpus, model.vocab.clone())?;

    let out = File::create(&args.out)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    let mut w = BufWriter::new(out);

    let ids: Vec<usize> = (0..corpus.n_docs()).collect();
    for chunk in ids.chunks(cfg.infer_batch.max(1)) {
        let batch = corpus.batch(chunk)?;
        let z = model.infer(&batch.xnorm)?;
        for col in z.columns() {
            let row: Vec<String> = col.iter().map(|p| format!("{p:.9}")).collect();
            writeln!(w, "{}", row.join("\t"))
                .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
        }
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} rows x {} topics to {}",
        corpus.n_docs(),
        model.topics.n_topics(),
        args.out.display()
    );
    Ok(())
}
