//! TOML config files: stage configs, synthesizer configs and the experiment grid.

use std::path::{Path, PathBuf};

use maskshift::data::{load_features, load_features_csv};
use maskshift::pipeline::ExperimentPlan;
use maskshift::{Error, FeatureDataset, InitStrategy, MaskStrategy, Result, SynthConfig, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

/// Stage config from `--config`, or all defaults.
pub fn train_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => read_toml(p),
        None => Ok(TrainConfig::default()),
    }
}

/// Loads FTDS, or CSV when the extension is `.csv`.
pub fn load_dataset(path: &Path, num_classes: Option<usize>) -> Result<FeatureDataset> {
    let ds = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        load_features_csv(path, num_classes, None)?
    } else {
        load_features(path)?
    };
    if let Some(k) = num_classes {
        if ds.num_classes() != k {
            return Err(Error::Config(format!(
                "{} has {} classes, --num-classes says {k}",
                path.display(),
                ds.num_classes()
            )));
        }
    }
    Ok(ds)
}

fn default_strategies() -> Vec<MaskStrategy> {
    ExperimentPlan::default().strategies
}

fn default_inits() -> Vec<InitStrategy> {
    ExperimentPlan::default().inits
}

fn default_seeds() -> Vec<u64> {
    ExperimentPlan::default().seeds
}

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Inline synthetic domains. Mutually exclusive with `source`/`target`.
    pub synth: Option<SynthConfig>,
    /// Feature files, relative to the config file.
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub num_classes: Option<usize>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<MaskStrategy>,
    #[serde(default = "default_inits")]
    pub inits: Vec<InitStrategy>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub source_training: TrainConfig,
    #[serde(default)]
    pub mask: TrainConfig,
    #[serde(default)]
    pub finetune: TrainConfig,
    /// Relative to the config file; `--out` overrides.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let cfg: Self = read_toml(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            strategies: self.strategies.clone(),
            inits: self.inits.clone(),
            seeds: self.seeds.clone(),
            source_training: self.source_training.clone(),
            mask: self.mask.clone(),
            finetune: self.finetune.clone(),
            train_fraction: self.train_fraction,
            split_seed: self.split_seed,
        }
    }

    /// Checks the grid and that referenced files exist, before any work.
    pub fn validate(&self, base: &Path) -> Result<()> {
        self.plan().validate()?;
        match (&self.synth, &self.source, &self.target) {
            (Some(s), None, None) => s.validate(),
            (None, Some(s), Some(t)) => {
                for p in [s, t] {
                    let full = base.join(p);
                    if !full.is_file() {
                        return Err(Error::Config(format!("feature file {} does not exist", full.display())));
                    }
                }
                Ok(())
            }
            _ => Err(Error::Config("give either [synth] or both `source` and `target`".into())),
        }
    }

    pub fn datasets(&self, base: &Path) -> Result<(FeatureDataset, FeatureDataset)> {
        match (&self.synth, &self.source, &self.target) {
            (Some(s), _, _) => maskshift::data::synth_domains(s),
            (None, Some(s), Some(t)) => Ok((
                load_dataset(&base.join(s), self.num_classes)?,
                load_dataset(&base.join(t), self.num_classes)?,
            )),
            _ => Err(Error::Config("give either [synth] or both `source` and `target`".into())),
        }
    }
}
