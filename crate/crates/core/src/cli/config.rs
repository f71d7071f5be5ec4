//! JSON experiment files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{PretrainTarget, TrainConfig};
use crate::transfer::Scheme;

/// Per-field overrides of the default training configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub lr_pretrain: Option<f64>,
    pub epochs_pretrain: Option<usize>,
    pub lr_finetune: Option<f64>,
    pub epochs_finetune: Option<usize>,
    pub batch_size: Option<usize>,
    pub checkpoint_every: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        if let Some(v) = self.lr_pretrain {
            cfg.lr_pretrain = v;
        }
        if let Some(v) = self.epochs_pretrain {
            cfg.epochs_pretrain = v;
        }
        if let Some(v) = self.lr_finetune {
            cfg.lr_finetune = v;
        }
        if let Some(v) = self.epochs_finetune {
            cfg.epochs_finetune = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.checkpoint_every = v;
        }
        cfg
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::LowerBound, Scheme::Scheme1, Scheme::Scheme2, Scheme::UpperBound]
}

fn default_depths() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_adaptation() -> f64 {
    30.0
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Corpus name to corpus directory (or manifest file).
    pub corpora: BTreeMap<String, PathBuf>,
    /// (source, target) pairs; every ordered pair of distinct corpora when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(String, String)>>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub pretrain_target: PretrainTarget,
    #[serde(default = "default_adaptation")]
    pub adaptation_seconds: f64,
    #[serde(default)]
    pub adaptation_seed: u64,
    /// Relative paths resolve against the output root.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub save_models: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("experiment config: {e}")))
    }

    /// Reads a config file; corpus paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let mut cfg = Self::from_json(&text).map_err(|e| e.at(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.corpora.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        match &self.pairs {
            Some(p) => p.clone(),
            None => {
                let names: Vec<&String> = self.corpora.keys().collect();
                let mut out = Vec::new();
                for s in &names {
                    for t in &names {
                        if s != t {
                            out.push(((*s).clone(), (*t).clone()));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.apply(TrainConfig::default())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        if self.corpora.is_empty() {
            return Err(Error::InvalidConfig("no corpora declared".into()));
        }
        for (name, path) in &self.corpora {
            if !path.exists() {
                return Err(Error::InvalidConfig(format!("corpus '{name}': {} does not exist", path.display())));
            }
        }
        for (s, t) in self.pairs() {
            for n in [&s, &t] {
                if !self.corpora.contains_key(n) {
                    return Err(Error::InvalidConfig(format!("pair {s}->{t} names undeclared corpus '{n}'")));
                }
            }
        }
        if self.pairs().is_empty() {
            return Err(Error::InvalidConfig("no (source, target) pairs to run".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        if !(self.adaptation_seconds >= 0.0) {
            return Err(Error::InvalidConfig("adaptation_seconds must be non-negative".into()));
        }
        self.train_config().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::from_json(r#"{"corpora": {"a": "x", "b": "y"}, "train": {"epochs_pretrain": 7}}"#).unwrap();
        assert_eq!(c.schemes.len(), 4);
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.train_config().epochs_pretrain, 7);
        assert_eq!(c.train_config().epochs_finetune, 130);
        assert_eq!(c.pairs(), vec![("a".to_string(), "b".to_string()), ("b".to_string(), "a".to_string())]);
        assert_eq!(c.pretrain_target, PretrainTarget::CleanInput);
    }

    #[test]
    fn rejects_unknown_scheme_and_fields() {
        assert!(ExperimentConfig::from_json(r#"{"corpora": {}, "schemes": ["S9"]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"corpora": {}, "bogus": 1}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"corpora": {"a": "/definitely/missing"}, "pairs": [["a","a"]]}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = ExperimentConfig::from_json(r#"{"corpora": {"a": "/"}, "pairs": [["a","a"]], "seeds": []}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
