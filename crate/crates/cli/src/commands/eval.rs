use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;
use ottm_core::eval::{evaluate, render_report};
use ottm_core::model::artifact;

use crate::{CliError, ConfigArgs};

#[derive(Args)]
pub struct EvalArgs {
    /// Trained model directory.
    #[arg(long)]
    model: PathBuf,
    /// Matrix Market counts of the evaluation (test) corpus.
    #[arg(long)]
    corpus: PathBuf,
    /// Per-document labels for the clustering metrics.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Restrict evaluation to these document indices (one per line).
    #[arg(long)]
    test_ids: Option<PathBuf>,
    /// Report output file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

fn read_ids(path: &Path, n_docs: usize) -> Result<Vec<usize>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut ids = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let id: usize = line.trim().parse().map_err(|_| {
            CliError::Data(format!("{}:{}: bad index `{}`", path.display(), idx + 1, line))
        })?;
        if id >= n_docs {
            return Err(CliError::Data(format!(
                "{}:{}: document index {id} outside corpus of {n_docs}",
                path.display(),
                idx + 1
            )));
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(CliError::Data(format!("{}: no indices", path.display())));
    }
    Ok(ids)
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let cfg = args.config.build()?;
    let model = artifact::load_model(&args.model)?;
    let mut corpus =
        ottm_core::corpus::BowCorpus::load(&args.corpus, model.vocab.clone())?;
    if let Some(labels) = &args.labels {
        corpus.load_labels(labels)?;
    }
    if let Some(ids_path) = &args.test_ids {
        let ids = read_ids(ids_path, corpus.n_docs())?;
        corpus = corpus.subset(&ids)?;
    }

    // Inferred topic distributions for every evaluated document.
    let k = model.topics.n_topics();
    let mut z = Array2::zeros((k, corpus.n_docs()));
    let ids: Vec<usize> = (0..corpus.n_docs()).collect();
    let mut col = 0;
    for chunk in ids.chunks(cfg.infer_batch.max(1)) {
        let batch = corpus.batch(chunk)?;
        let zb = model.infer(&batch.xnorm)?;
        for c in zb.columns() {
            z.column_mut(col).assign(&c);
            col += 1;
        }
    }

    let report = evaluate(&model, &corpus, &z, &cfg.eval_options())?;
    let mut text = String::from("[config]\n");
    text.push_str(&cfg.echo());
    text.push('\n');
    text.push_str(&render_report(&report));
    std::fs::write(&args.out, text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;

    if let (Some(tp), Some(tn)) = (report.top_purity, report.top_nmi) {
        println!("top_purity = {tp}\ntop_nmi = {tn}");
    }
    println!("report written to {}", args.out.display());
    Ok(())
}
