use std::fmt;
use std::str::FromStr;

use listops_autograd::checkpoint::Manifest;

use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Lstm,
    TreeLstm,
    RlSpinn,
    StGumbel,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 4] = [EncoderKind::Lstm, EncoderKind::TreeLstm, EncoderKind::RlSpinn, EncoderKind::StGumbel];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Lstm => "lstm",
            EncoderKind::TreeLstm => "treelstm",
            EncoderKind::RlSpinn => "rl-spinn",
            EncoderKind::StGumbel => "st-gumbel",
        }
    }

    /// Models that induce their own parses.
    pub fn is_latent(self) -> bool {
        matches!(self, EncoderKind::RlSpinn | EncoderKind::StGumbel)
    }

    /// Models whose predictions come with a tree.
    pub fn emits_trees(self) -> bool {
        self != EncoderKind::Lstm
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "lstm" => Ok(EncoderKind::Lstm),
            "treelstm" => Ok(EncoderKind::TreeLstm),
            "rlspinn" | "spinn" => Ok(EncoderKind::RlSpinn),
            "stgumbel" | "gumbel" => Ok(EncoderKind::StGumbel),
            _ => Err(ModelError::Config(format!("unknown encoder kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub model_dim: usize,
    pub mlp_hidden: usize,
    /// Applied to the sentence vector during training only.
    pub dropout: f64,
    /// Gumbel-softmax temperature (ST-Gumbel only).
    pub temperature: f64,
}

impl EncoderConfig {
    pub fn new(kind: EncoderKind, model_dim: usize) -> Self {
        EncoderConfig { kind, model_dim, mlp_hidden: model_dim, dropout: 0.0, temperature: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.model_dim == 0 || self.mlp_hidden == 0 {
            return Err(ModelError::Config("model_dim and mlp_hidden must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::Config(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> Manifest {
        [
            ("kind", self.kind.name().to_string()),
            ("model_dim", self.model_dim.to_string()),
            ("mlp_hidden", self.mlp_hidden.to_string()),
            ("dropout", self.dropout.to_string()),
            ("temperature", self.temperature.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self, ModelError> {
        fn field<T: FromStr>(m: &Manifest, key: &str) -> Result<T, ModelError> {
            let raw = m.get(key).ok_or_else(|| ModelError::Config(format!("manifest lacks {key}")))?;
            raw.parse().map_err(|_| ModelError::Config(format!("bad {key} {raw:?}")))
        }
        let cfg = EncoderConfig {
            kind: m.get("kind").ok_or_else(|| ModelError::Config("manifest lacks kind".into()))?.parse()?,
            model_dim: field(m, "model_dim")?,
            mlp_hidden: field(m, "mlp_hidden")?,
            dropout: field(m, "dropout")?,
            temperature: field(m, "temperature")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_loosely() {
        for k in EncoderKind::ALL {
            assert_eq!(k.name().parse::<EncoderKind>().unwrap(), k);
        }
        assert_eq!("RL_SPINN".parse::<EncoderKind>().unwrap(), EncoderKind::RlSpinn);
        assert_eq!("ST_GUMBEL".parse::<EncoderKind>().unwrap(), EncoderKind::StGumbel);
        assert_eq!("TREELSTM".parse::<EncoderKind>().unwrap(), EncoderKind::TreeLstm);
        assert!("gru".parse::<EncoderKind>().is_err());
    }

    #[test]
    fn validation_and_manifest_round_trip() {
        let mut c = EncoderConfig::new(EncoderKind::StGumbel, 64);
        c.dropout = 0.1;
        c.temperature = 0.5;
        assert_eq!(EncoderConfig::from_manifest(&c.to_manifest()).unwrap(), c);
        assert!(EncoderConfig { model_dim: 0, ..c }.validate().is_err());
        assert!(EncoderConfig { dropout: 1.0, ..c }.validate().is_err());
        assert!(EncoderConfig { temperature: 0.0, ..c }.validate().is_err());
    }
}
