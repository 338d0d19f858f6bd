//! Model persistence: a directory with a key = value manifest, one binary
//! file per parameter matrix, the vocabulary, and the training log.
//!
//! Matrix files are little-endian f64, row-major, behind an 8-byte magic
//! and a u64 row/column header. Loading validates every shape against the
//! manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::corpus::Vocabulary;
use crate::embeddings::{TopicEmbeddings, WordEmbeddings};
use crate::error::{Error, Result};
use crate::model::adam::AdamConfig;
use crate::model::encoder::{DropoutConfig, EncoderParams};
use crate::model::{EpochStats, TopicModel, TrainConfig};
use crate::ot::SinkhornConfig;

const MAGIC: &[u8; 8] = b"OTTMMTX1";
const FORMAT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";

pub fn write_matrix(path: &Path, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    let shown = path.display().to_string();
    if data.len() != rows * cols {
        return Err(Error::data(format!(
            "{shown}: {} values for a {rows} x {cols} matrix",
            data.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path).map_err(Error::io(&shown))?);
    w.write_all(MAGIC).map_err(Error::io(&shown))?;
    w.write_all(&(rows as u64).to_le_bytes())
        .map_err(Error::io(&shown))?;
    w.write_all(&(cols as u64).to_le_bytes())
        .map_err(Error::io(&shown))?;
    for v in data {
        w.write_all(&v.to_le_bytes()).map_err(Error::io(&shown))?;
    }
    w.flush().map_err(Error::io(&shown))
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let shown = path.display().to_string();
    let mut r = BufReader::new(File::open(path).map_err(Error::io(&shown))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(Error::io(&shown))?;
    if &magic != MAGIC {
        return Err(Error::data(format!("{shown}: bad magic, not a matrix file")));
    }
    let mut dim = [0u8; 8];
    r.read_exact(&mut dim).map_err(Error::io(&shown))?;
    let rows = u64::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim).map_err(Error::io(&shown))?;
    let cols = u64::from_le_bytes(dim) as usize;
    let mut data = vec![0f64; rows.checked_mul(cols).ok_or_else(|| {
        Error::data(format!("{shown}: matrix dimensions overflow"))
    })?];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut buf).map_err(Error::io(&shown))?;
        *v = f64::from_le_bytes(buf);
    }
    if r.read(&mut buf).map_err(Error::io(&shown))? != 0 {
        return Err(Error::data(format!("{shown}: trailing bytes after matrix data")));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::data(format!("{shown}: {e}")))
}

fn write_vector(path: &Path, v: &Array1<f64>) -> Result<()> {
    write_matrix(path, v.len(), 1, v.as_slice().expect("contiguous"))
}

fn read_vector(path: &Path, expect_len: usize) -> Result<Array1<f64>> {
    let m = read_matrix(path)?;
    if m.dim() != (expect_len, 1) {
        return Err(Error::data(format!(
            "{}: expected a {expect_len} x 1 vector, found {:?}",
            path.display(),
            m.dim()
        )));
    }
    Ok(m.column(0).to_owned())
}

struct Manifest(BTreeMap<String, String>);

impl Manifest {
    fn load(path: &Path) -> Result<Self> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(Error::io(&shown))?;
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(&shown, idx + 1, "expected `key = value`")
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Manifest(map))
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::data(format!("manifest is missing `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::data(format!("manifest `{key}` has a bad value")))
    }
}

/// Persist a trained model into `dir` (which must already exist and be
/// writable; the caller owns atomicity of the directory itself).
pub fn save_model(model: &TopicModel, dir: &Path) -> Result<()> {
    let cfg = &model.config;
    let mut manifest = String::new();
    let mut kv = |k: &str, v: String| {
        manifest.push_str(k);
        manifest.push_str(" = ");
        manifest.push_str(&v);
        manifest.push('\n');
    };
    kv("format_version", FORMAT_VERSION.to_string());
    kv("vocab_size", model.vocab.len().to_string());
    kv("n_topics", cfg.n_topics.to_string());
    kv("embedding_dim", model.words.dim().to_string());
    kv("hidden", cfg.hidden.to_string());
    kv("epsilon", cfg.epsilon.to_string());
    kv("alpha", cfg.sinkhorn.alpha.to_string());
    kv("sinkhorn_max_iter", cfg.sinkhorn.max_iter.to_string());
    kv("sinkhorn_tol", cfg.sinkhorn.tol.to_string());
    kv("sinkhorn_unroll_cap", cfg.sinkhorn.unroll_cap.to_string());
    kv("lr", cfg.adam.lr.to_string());
    kv("adam_beta1", cfg.adam.beta1.to_string());
    kv("adam_beta2", cfg.adam.beta2.to_string());
    kv("adam_eps", cfg.adam.eps.to_string());
    kv("batch_size", cfg.batch_size.to_string());
    kv("epochs", cfg.epochs.to_string());
    kv("seed", cfg.seed.to_string());
    kv("dropout_rate", cfg.dropout.rate.to_string());
    kv("dropout_rate_is_keep_prob", cfg.dropout.rate_is_keep_prob.to_string());
    kv("bn_momentum", cfg.bn_momentum.to_string());
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest)
        .map_err(Error::io(manifest_path.display().to_string()))?;

    model.vocab.save(&dir.join(VOCAB_FILE))?;

    let e = &model.encoder;
    let m2 = |name: &str, a: &Array2<f64>| -> Result<()> {
        write_matrix(
            &dir.join(name),
            a.nrows(),
            a.ncols(),
            a.as_slice().expect("contiguous"),
        )
    };
    m2("w1.bin", &e.w1)?;
    write_vector(&dir.join("b1.bin"), &e.b1)?;
    write_vector(&dir.join("bn_gamma.bin"), &e.bn_gamma)?;
    write_vector(&dir.join("bn_beta.bin"), &e.bn_beta)?;
    write_vector(&dir.join("bn_running_mean.bin"), &e.bn_running_mean)?;
    write_vector(&dir.join("bn_running_var.bin"), &e.bn_running_var)?;
    m2("w2.bin", &e.w2)?;
    write_vector(&dir.join("b2.bin"), &e.b2)?;
    m2("topic_embeddings.bin", model.topics.matrix())?;
    m2("word_embeddings.bin", model.words.matrix())?;

    let mut log = String::from("epoch\ttotal_loss\tlikelihood\tsinkhorn\tmean_sinkhorn_distance\n");
    for s in &model.train_log {
        log.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            s.epoch, s.total_loss, s.likelihood, s.sinkhorn, s.mean_sinkhorn_distance
        ));
    }
    let log_path = dir.join(TRAIN_LOG_FILE);
    std::fs::write(&log_path, log).map_err(Error::io(log_path.display().to_string()))?;
    Ok(())
}

/// Load a model directory, validating every matrix shape.
pub fn load_model(dir: &Path) -> Result<TopicModel> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    let version: u32 = manifest.parse("format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "unsupported model format version {version}"
        )));
    }
    let v: usize = manifest.parse("vocab_size")?;
    let k: usize = manifest.parse("n_topics")?;
    let l: usize = manifest.parse("embedding_dim")?;
    let hidden: usize = manifest.parse("hidden")?;

    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    if vocab.len() != v {
        return Err(Error::data(format!(
            "vocabulary file has {} tokens, manifest says {v}",
            vocab.len()
        )));
    }

    let expect = |name: &str, a: Array2<f64>, rows: usize, cols: usize| -> Result<Array2<f64>> {
        if a.dim() != (rows, cols) {
            return Err(Error::data(format!(
                "{name}: expected {rows} x {cols}, found {:?}",
                a.dim()
            )));
        }
        Ok(a)
    };

    let w1 = expect("w1.bin", read_matrix(&dir.join("w1.bin"))?, hidden, v)?;
    let b1 = read_vector(&dir.join("b1.bin"), hidden)?;
    let bn_gamma = read_vector(&dir.join("bn_gamma.bin"), hidden)?;
    let bn_beta = read_vector(&dir.join("bn_beta.bin"), hidden)?;
    let bn_running_mean = read_vector(&dir.join("bn_running_mean.bin"), hidden)?;
    let bn_running_var = read_vector(&dir.join("bn_running_var.bin"), hidden)?;
    if bn_running_var.iter().any(|&x| x < 0.0) {
        return Err(Error::data("negative running variance in model artifact"));
    }
    let w2 = expect("w2.bin", read_matrix(&dir.join("w2.bin"))?, k, hidden)?;
    let b2 = read_vector(&dir.join("b2.bin"), k)?;
    let g = expect(
        "topic_embeddings.bin",
        read_matrix(&dir.join("topic_embeddings.bin"))?,
        l,
        k,
    )?;
    let e = expect(
        "word_embeddings.bin",
        read_matrix(&dir.join("word_embeddings.bin"))?,
        l,
        v,
    )?;

    let dropout = DropoutConfig {
        rate: manifest.parse("dropout_rate")?,
        rate_is_keep_prob: manifest.parse("dropout_rate_is_keep_prob")?,
    };
    let config = TrainConfig {
        n_topics: k,
        hidden,
        epsilon: manifest.parse("epsilon")?,
        sinkhorn: SinkhornConfig {
            alpha: manifest.parse("alpha")?,
            max_iter: manifest.parse("sinkhorn_max_iter")?,
            tol: manifest.parse("sinkhorn_tol")?,
            unroll_cap: manifest.parse("sinkhorn_unroll_cap")?,
        },
        adam: AdamConfig {
            lr: manifest.parse("lr")?,
            beta1: manifest.parse("adam_beta1")?,
            beta2: manifest.parse("adam_beta2")?,
            eps: manifest.parse("adam_eps")?,
        },
        batch_size: manifest.parse("batch_size")?,
        epochs: manifest.parse("epochs")?,
        seed: manifest.parse("seed")?,
        dropout,
        bn_momentum: manifest.parse("bn_momentum")?,
    };

    let encoder = EncoderParams {
        w1,
        b1,
        bn_gamma,
        bn_beta,
        bn_running_mean,
        bn_running_var,
        w2,
        b2,
        dropout,
        bn_momentum: config.bn_momentum,
    };

    let train_log = read_train_log(&dir.join(TRAIN_LOG_FILE))?;

    Ok(TopicModel {
        encoder,
        topics: TopicEmbeddings::from_matrix(g),
        words: WordEmbeddings::from_matrix(e)?,
        vocab,
        train_log,
        config,
    })
}

fn read_train_log(path: &Path) -> Result<Vec<EpochStats>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(Error::io(&shown))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(&shown, idx + 1, "expected 5 tab-separated fields"));
        }
        let bad = |_| Error::parse(&shown, idx + 1, "bad number");
        out.push(EpochStats {
            epoch: fields[0].parse().map_err(bad)?,
            total_loss: fields[1].parse().map_err(|_| Error::parse(&shown, idx + 1, "bad number"))?,
            likelihood: fields[2].parse().map_err(|_| Error::parse(&shown, idx + 1, "bad number"))?,
            sinkhorn: fields[3].parse().map_err(|_| Error::parse(&shown, idx + 1, "bad number"))?,
            mean_sinkhorn_distance: fields[4]
                .parse()
                .map_err(|_| Error::parse(&shown, idx + 1, "bad number"))?,
        });
    }
    Ok(out)
}
