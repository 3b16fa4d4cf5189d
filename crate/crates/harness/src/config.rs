use std::path::PathBuf;

use listops::Exec;
use listops_models::{EncoderConfig, EncoderKind};
use sha2::{Digest, Sha256};

use crate::train::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub lr: f64,
    pub l2: f64,
    /// Multiplier applied to the learning rate on a plateau, in `(0, 1]`.
    pub lr_decay: f64,
    /// Training stops once the learning rate falls below this.
    pub lr_floor: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without test-accuracy gain before the learning rate decays.
    pub patience: usize,
    pub seed: u64,
    /// Decay of the REINFORCE moving-average baseline.
    pub baseline_decay: f64,
    /// Use only the first `n` training examples.
    pub max_train: Option<usize>,
    /// Directory holding `train.tsv` and `test.tsv`.
    pub data_dir: Option<PathBuf>,
    pub exec: Exec,
}

impl TrainConfig {
    pub fn new(kind: EncoderKind, model_dim: usize, seed: u64) -> Self {
        TrainConfig {
            encoder: EncoderConfig::new(kind, model_dim),
            lr: 2e-3,
            l2: 0.0,
            lr_decay: 0.9,
            lr_floor: 1e-5,
            batch_size: 32,
            max_epochs: 10,
            patience: 1,
            seed,
            baseline_decay: listops_autograd::DEFAULT_BASELINE_DECAY,
            max_train: None,
            data_dir: None,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.encoder.validate()?;
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be non-negative", self.lr));
        }
        if !(self.l2 >= 0.0) {
            return bad(format!("l2 {} must be non-negative", self.l2));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay {} outside (0, 1]", self.lr_decay));
        }
        if !(self.lr_floor >= 0.0) {
            return bad(format!("lr_floor {} must be non-negative", self.lr_floor));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive".into());
        }
        if !(self.baseline_decay > 0.0 && self.baseline_decay < 1.0) {
            return bad(format!("baseline_decay {} outside (0, 1)", self.baseline_decay));
        }
        if self.max_train == Some(0) {
            return bad("max_train must be positive".into());
        }
        Ok(())
    }

    /// Sets one field from its `key=value` spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, TrainError> {
            v.parse().map_err(|_| TrainError::Config(format!("bad value {v:?} for {key}")))
        }
        match key {
            "kind" | "model" => self.encoder.kind = value.parse()?,
            "model_dim" | "dim" => self.encoder.model_dim = num(key, value)?,
            "mlp_hidden" => self.encoder.mlp_hidden = num(key, value)?,
            "dropout" => self.encoder.dropout = num(key, value)?,
            "temperature" => self.encoder.temperature = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "l2" => self.l2 = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "lr_floor" => self.lr_floor = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "max_epochs" | "epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "baseline_decay" => self.baseline_decay = num(key, value)?,
            "max_train" => self.max_train = if value == "all" { None } else { Some(num(key, value)?) },
            "data" | "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "parallel" => {
                self.exec = if num::<bool>(key, value)? { Exec::Parallel } else { Exec::Sequential };
            }
            _ => return Err(TrainError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<(), TrainError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("config line {}: expected key=value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Canonical `key=value` listing of everything that affects results.
    pub fn canonical(&self) -> String {
        let e = &self.encoder;
        format!(
            "kind={}\nmodel_dim={}\nmlp_hidden={}\ndropout={}\ntemperature={}\nlr={}\nl2={}\nlr_decay={}\nlr_floor={}\n\
             batch_size={}\nmax_epochs={}\npatience={}\nseed={}\nbaseline_decay={}\nmax_train={}\n",
            e.kind,
            e.model_dim,
            e.mlp_hidden,
            e.dropout,
            e.temperature,
            self.lr,
            self.l2,
            self.lr_decay,
            self.lr_floor,
            self.batch_size,
            self.max_epochs,
            self.patience,
            self.seed,
            self.baseline_decay,
            self.max_train.map_or_else(|| "all".to_string(), |n| n.to_string()),
        )
    }

    /// First 16 hex digits of the SHA-256 of [`TrainConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
