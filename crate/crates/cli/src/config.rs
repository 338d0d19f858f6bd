//! Flat key = value run configuration with strict keys, documented
//! defaults, and flag > file > default precedence. The effective
//! configuration is echoed verbatim so every run is auditable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ottm_core::eval::{ClusteringMode, EvalOptions};
use ottm_core::model::{AdamConfig, DropoutConfig, TrainConfig};
use ottm_core::ot::SinkhornConfig;

use crate::CliError;

macro_rules! config_keys {
    ($($key:ident : $ty:ty = $default:expr ; $doc:expr),+ $(,)?) => {
        /// Every tunable of the pipeline in one flat namespace.
        #[derive(Debug, Clone)]
        pub struct RunConfig {
            $(pub $key: $ty),+
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($key: $default),+ }
            }
        }

        impl RunConfig {
            pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
                match key {
                    $(stringify!($key) => {
                        self.$key = value.parse::<$ty>().map_err(|_| {
                            CliError::Usage(format!(
                                "bad value `{value}` for config key `{key}`"
                            ))
                        })?;
                    }),+
                    _ => {
                        return Err(CliError::Usage(format!(
                            "unknown config key `{key}`"
                        )))
                    }
                }
                Ok(())
            }

            /// Sorted `key = value` lines describing the effective config.
            pub fn echo(&self) -> String {
                let mut map = BTreeMap::new();
                $(map.insert(stringify!($key), self.$key.to_string());)+
                let mut out = String::new();
                for (k, v) in map {
                    out.push_str(k);
                    out.push_str(" = ");
                    out.push_str(&v);
                    out.push('\n');
                }
                out
            }

            pub fn describe_keys() -> Vec<(&'static str, String, &'static str)> {
                let d = RunConfig::default();
                vec![$((stringify!($key), d.$key.to_string(), $doc)),+]
            }
        }
    };
}

config_keys! {
    k: usize = 100; "number of topics",
    hidden: usize = 200; "encoder hidden units",
    embedding_dim: usize = 50; "word embedding dimension expected in the vectors file",
    epsilon: f64 = 0.07; "weight of the reconstruction likelihood term",
    alpha: f64 = 20.0; "Sinkhorn smoothing temperature",
    sinkhorn_max_iter: usize = 1000; "Sinkhorn iteration cap",
    sinkhorn_tol: f64 = 0.005; "Sinkhorn stop tolerance on the scaling change",
    sinkhorn_unroll_cap: usize = 50; "iterations retained for backpropagation",
    lr: f64 = 0.001; "Adam learning rate",
    adam_beta1: f64 = 0.9; "Adam first-moment decay",
    adam_beta2: f64 = 0.999; "Adam second-moment decay",
    adam_eps: f64 = 1e-8; "Adam denominator fuzz",
    batch_size: usize = 200; "training batch size",
    epochs: usize = 50; "training epochs",
    seed: u64 = 1; "root seed; every random component derives from it",
    dropout_rate: f64 = 0.75; "dropout rate (probability of zeroing a unit)",
    dropout_rate_is_keep_prob: bool = false; "read dropout_rate as a keep probability instead",
    bn_momentum: f64 = 0.99; "batch-norm running-statistics momentum",
    train_fraction: f64 = 1.0; "fraction of documents trained on; the rest is written as a test split",
    min_df: usize = 1; "ingest: keep tokens in at least this many documents",
    lowercase: bool = true; "ingest: lowercase tokens",
    top_words: usize = 10; "topics: words listed per topic",
    npmi_top_n: usize = 10; "eval: words per topic for coherence",
    td_top_n: usize = 25; "eval: words per topic for diversity",
    npmi_smoothing: f64 = 0.01; "eval: additive smoothing on co-occurrence counts",
    proportions: CommaList<f64> = CommaList(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]); "eval: topic selection proportions",
    kmeans_ks: CommaList<usize> = CommaList(vec![20, 40, 60, 80, 100]); "eval: cluster counts for k-means",
    kmeans_max_iter: usize = 300; "eval: k-means iteration cap",
    clustering: ClusteringKey = ClusteringKey(ClusteringMode::Auto); "eval: clustering metrics (auto|on|off)",
    infer_batch: usize = 200; "inference batch size",
}

/// Comma-separated list values inside the flat key space.
#[derive(Debug, Clone)]
pub struct CommaList<T>(pub Vec<T>);

impl<T: std::fmt::Display> std::fmt::Display for CommaList<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl<T: std::str::FromStr> std::str::FromStr for CommaList<T> {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            out.push(part.parse::<T>().map_err(|_| ())?);
        }
        if out.is_empty() {
            return Err(());
        }
        Ok(CommaList(out))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClusteringKey(pub ClusteringMode);

impl std::fmt::Display for ClusteringKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.0 {
            ClusteringMode::Auto => "auto",
            ClusteringMode::On => "on",
            ClusteringMode::Off => "off",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ClusteringKey {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ClusteringKey(ClusteringMode::Auto)),
            "on" => Ok(ClusteringKey(ClusteringMode::On)),
            "off" => Ok(ClusteringKey(ClusteringMode::Off)),
            _ => Err(()),
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid by an optional config file, overlaid by --set
    /// pairs, in that order.
    pub fn assemble(file: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for pair in sets {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--set expects KEY=VALUE, got `{pair}`"))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    idx + 1
                ))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            n_topics: self.k,
            hidden: self.hidden,
            epsilon: self.epsilon,
            sinkhorn: SinkhornConfig {
                alpha: self.alpha,
                max_iter: self.sinkhorn_max_iter,
                tol: self.sinkhorn_tol,
                unroll_cap: self.sinkhorn_unroll_cap,
            },
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            dropout: DropoutConfig {
                rate: self.dropout_rate,
                rate_is_keep_prob: self.dropout_rate_is_keep_prob,
            },
            bn_momentum: self.bn_momentum,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            proportions: self.proportions.0.clone(),
            kmeans_ks: self.kmeans_ks.0.clone(),
            npmi_top_n: self.npmi_top_n,
            td_top_n: self.td_top_n,
            smoothing: self.npmi_smoothing,
            kmeans_max_iter: self.kmeans_max_iter,
            seed: self.seed,
            clustering: self.clustering.0,
        }
    }

    pub fn write_echo(&self, dir: &Path) -> Result<(), CliError> {
        let path: PathBuf = dir.join("config.txt");
        std::fs::write(&path, self.echo())
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.alpha, 20.0);
        assert_eq!(cfg.epsilon, 0.07);
        assert_eq!(cfg.lr, 0.001);
        assert_eq!(cfg.batch_size, 200);
        assert_eq!(cfg.epochs, 50);
        assert_eq!(cfg.k, 100);
        assert_eq!(cfg.kmeans_ks.0, vec![20, 40, 60, 80, 100]);
        assert_eq!(cfg.proportions.0.len(), 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply("alpha", "5.5").is_ok());
        assert_eq!(cfg.alpha, 5.5);
        assert!(cfg.apply("not_a_key", "1").is_err());
        assert!(cfg.apply("alpha", "abc").is_err());
    }

    #[test]
    fn precedence_is_set_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "# comment\nalpha = 5\nepochs = 3\n").unwrap();
        let cfg =
            RunConfig::assemble(Some(&file), &["alpha=7".to_string()]).unwrap();
        assert_eq!(cfg.alpha, 7.0);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.lr, 0.001);
    }

    #[test]
    fn echo_contains_every_key_sorted() {
        let cfg = RunConfig::default();
        let echo = cfg.echo();
        let lines: Vec<&str> = echo.lines().collect();
        assert_eq!(lines.len(), RunConfig::describe_keys().len());
        let mut sorted = lines.clone();
        sorted.sort_unstable();
        assert_eq!(lines, sorted);
        assert!(echo.contains("alpha = 20"));
        assert!(echo.contains("proportions = 0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"));
    }
}
