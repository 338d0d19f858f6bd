use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use ottm_core::model::artifact;

use crate::{CliError, ConfigArgs};

#[derive(Args)]
pub struct TopicsArgs {
    /// Trained model directory.
    #[arg(long)]
    model: PathBuf,
    /// Words listed per topic (overrides the top_words config key).
    #[arg(long)]
    n: Option<usize>,
    /// Write the listing here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export the topic embedding matrix (binary format) for external
    /// visualization tools.
    #[arg(long)]
    export_embeddings: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

pub fn run(args: &TopicsArgs) -> Result<(), CliError> {
    let cfg = args.config.build()?;
    let model = artifact::load_model(&args.model)?;
    let n = args.n.unwrap_or(cfg.top_words).min(model.vocab.len());

    let mut listing = String::from("topic\trank\ttoken\tcost\n");
    for topic in 0..model.topics.n_topics() {
        for (rank, (word, cost)) in model.top_words(topic, n)?.into_iter().enumerate() {
            listing.push_str(&format!(
                "{topic}\t{rank}\t{}\t{cost}\n",
                model.vocab.token(word)
            ));
        }
    }
    match &args.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            w.write_all(listing.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        }
        None => print!("{listing}"),
    }

    if let Some(path) = &args.export_embeddings {
        let g = model.topics.matrix();
        artifact::write_matrix(path, g.nrows(), g.ncols(), g.as_slice().expect("contiguous"))?;
        eprintln!(
            "exported {} x {} topic embeddings to {}",
            g.nrows(),
            g.ncols(),
            path.display()
        );
    }
    Ok(())
}
