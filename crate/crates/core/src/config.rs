//! TOML run configuration. Every section and key is optional; see
//! `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::extraction::{EvidenceConfig, TaggerConfig};
use crate::nn::TrainConfig;
use crate::supervision::{DistantConfig, GroupingConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointPaths {
    pub tagger: Option<PathBuf>,
    pub evidence: Option<PathBuf>,
    pub linker: Option<PathBuf>,
    pub inference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkerConfig {
    /// UNRELATED samples per gold pair when deriving training data.
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_negatives() -> usize {
    3
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            negatives: default_negatives(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    /// Drop comparators and dedupe on (intervention, outcome).
    #[serde(default)]
    pub binary: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub grouping: GroupingConfig,
    #[serde(default)]
    pub tagger: TaggerConfig,
    #[serde(default)]
    pub evidence: EvidenceConfig,
    #[serde(default)]
    pub linker: LinkerConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub checkpoints: CheckpointPaths,
    #[serde(default)]
    pub pipeline: PipelineOptions,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative checkpoint paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Config::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut config.checkpoints.tagger);
        resolve(&mut config.checkpoints.evidence);
        resolve(&mut config.checkpoints.linker);
        resolve(&mut config.checkpoints.inference);
        resolve(&mut config.encoder.path);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.grouping.validate()?;
        if !(0.0..=1.0).contains(&self.evidence.threshold) {
            return Err(Error::Config(format!(
                "evidence.threshold {} outside [0, 1]",
                self.evidence.threshold
            )));
        }
        for (name, t) in [
            ("tagger", &self.tagger.train),
            ("evidence", &self.evidence.train),
            ("linker", &self.linker.train),
            ("inference", &self.inference.train),
        ] {
            if t.batch_size == 0 {
                return Err(Error::Config(format!("{name}.train.batch_size must be positive")));
            }
            if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
                return Err(Error::Config(format!("{name}.train.learning_rate must be positive")));
            }
        }
        Ok(())
    }

    /// Sets the run seed and derives a distinct seed for each training stage.
    pub fn with_seed(mut self, seed: u64) -> Config {
        self.seed = seed;
        self.tagger.train.seed = seed;
        self.evidence.train.seed = seed.wrapping_add(1);
        self.linker.train.seed = seed.wrapping_add(2);
        self.inference.train.seed = seed.wrapping_add(3);
        self
    }

    pub fn distant(&self) -> DistantConfig {
        DistantConfig {
            grouping: self.grouping,
            linker_negatives: self.linker.negatives,
            seed: self.seed,
        }
    }
}
