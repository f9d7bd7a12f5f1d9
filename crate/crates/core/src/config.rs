//! Training configuration and its flat `key=value` file format.

use serde::{Deserialize, Serialize};

use crate::circuit::{Embedding, QramArchitecture};
use crate::error::{QramError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub n_conv_layers: usize,
    pub n_sel_layers: usize,
    pub embedding: Embedding,
    pub expansion_target: usize,
    pub max_cluster_size: usize,
    /// Epochs for the classifier stage of the ML pipelines.
    pub classify_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.001,
            seed: 0,
            n_conv_layers: 1,
            n_sel_layers: 3,
            embedding: Embedding::Basis,
            expansion_target: 512,
            max_cluster_size: 4,
            classify_epochs: 30,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| QramError::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(QramError::Config("epochs must be >= 1".into()));
        }
        if self.classify_epochs < 1 {
            return Err(QramError::Config("classify_epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(QramError::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(QramError::Config("learning_rate must be > 0".into()));
        }
        if self.n_sel_layers < 1 {
            return Err(QramError::Config("n_sel_layers must be >= 1".into()));
        }
        if self.max_cluster_size < 2 {
            return Err(QramError::Config("max_cluster_size must be >= 2".into()));
        }
        Ok(())
    }

    pub fn architecture(&self, n_qubits: usize) -> QramArchitecture {
        QramArchitecture {
            n_qubits,
            n_conv_layers: self.n_conv_layers,
            n_sel_layers: self.n_sel_layers,
        }
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "n_conv_layers" => self.n_conv_layers = parse(key, value)?,
            "n_sel_layers" => self.n_sel_layers = parse(key, value)?,
            "expansion_target" => self.expansion_target = parse(key, value)?,
            "max_cluster_size" => self.max_cluster_size = parse(key, value)?,
            "classify_epochs" => self.classify_epochs = parse(key, value)?,
            "embedding" => {
                self.embedding = match value {
                    "basis" => Embedding::Basis,
                    "angle" => Embedding::Angle,
                    other => {
                        return Err(QramError::Config(format!(
                            "embedding must be basis or angle, got {other:?}"
                        )))
                    }
                }
            }
            other => return Err(QramError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` document on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                QramError::Config(format!(
                    "line {}: expected key=value, got {line:?}",
                    lineno + 1
                ))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_kv_text(&self) -> String {
        let embedding = match self.embedding {
            Embedding::Basis => "basis",
            Embedding::Angle => "angle",
        };
        format!(
            "epochs={}\nbatch_size={}\nlearning_rate={}\nseed={}\nn_conv_layers={}\nn_sel_layers={}\nembedding={}\nexpansion_target={}\nmax_cluster_size={}\nclassify_epochs={}\n",
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.seed,
            self.n_conv_layers,
            self.n_sel_layers,
            embedding,
            self.expansion_target,
            self.max_cluster_size,
            self.classify_epochs
        )
    }
}
