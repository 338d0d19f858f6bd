use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::Args;
use ottm_core::corpus::ingest::{ingest_text, load_stopwords, IngestOptions};

use crate::{CliError, ConfigArgs};

#[derive(Debug, Clone, clap::ValueEnum)]
pub enum InputFormat {
    /// One document per line of raw text.
    Text,
    /// An existing Matrix Market counts file (requires --vocab).
    Mm,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Input file: raw text or Matrix Market counts, per --format.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for vocab.txt, counts.mm, and labels.txt.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: InputFormat,
    /// Existing vocabulary, required for --format mm.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Per-document labels aligned with the input, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Stopword list, one token per line (text format only).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn read_raw_labels(path: &Path) -> Result<Vec<u32>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let value: u32 = line.trim().parse().map_err(|_| {
            CliError::Data(format!(
                "{}:{}: bad label `{}`",
                path.display(),
                idx + 1,
                line.trim()
            ))
        })?;
        labels.push(value);
    }
    Ok(labels)
}

pub fn run(args: &IngestArgs) -> Result<(), CliError> {
    let cfg = args.config.build()?;

    let corpus = match args.format {
        InputFormat::Text => {
            let stopwords = match &args.stopwords {
                Some(p) => load_stopwords(p)?,
                None => Default::default(),
            };
            let labels = args.labels.as_deref().map(read_raw_labels).transpose()?;
            let opts = IngestOptions {
                lowercase: cfg.lowercase,
                min_df: cfg.min_df,
                stopwords,
            };
            let (corpus, summary) = ingest_text(&args.input, labels, &opts)?;
            if summary.dropped_docs > 0 {
                eprintln!(
                    "dropped {} document(s) left empty by filtering (labels dropped with them)",
                    summary.dropped_docs
                );
            }
            corpus
        }
        InputFormat::Mm => {
            let vocab_path = args.vocab.as_ref().ok_or_else(|| {
                CliError::Usage("--format mm requires --vocab".to_string())
            })?;
            super::load_corpus(&args.input, vocab_path, args.labels.as_deref())?
        }
    };

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    corpus.vocab().save(&args.out.join("vocab.txt"))?;
    corpus.save_counts(&args.out.join("counts.mm"))?;
    if corpus.labels().is_some() {
        corpus.save_labels(&args.out.join("labels.txt"))?;
    }
    cfg.write_echo(&args.out)?;

    println!(
        "vocabulary = {}\ndocuments = {}\ntotal_tokens = {}",
        corpus.vocab_size(),
        corpus.n_docs(),
        corpus.total_tokens()
    );
    Ok(())
}
