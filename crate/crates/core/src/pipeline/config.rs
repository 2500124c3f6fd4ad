use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::features::{SplitConfig, DEFAULT_MAX_FEATURES};
use crate::model::TrainConfig;
use crate::project::TsneConfig;
use crate::registerdata::SynthConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory of codebook TSVs; the bundled codebook when unset.
    pub codebook_dir: Option<PathBuf>,
    /// Sentence template file; the bundled set when unset.
    pub templates: Option<PathBuf>,
    /// Where `experiment` writes its artifacts.
    pub work_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    /// Render unknown codes as placeholders instead of failing.
    pub lenient_codes: bool,
    pub harmonize: bool,
    pub strict_codes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub train_cap: Option<usize>,
}

impl Default for SplitParams {
    fn default() -> Self {
        let d = SplitConfig::default();
        SplitParams { test_fraction: d.test_fraction, validation_fraction: d.validation_fraction, train_cap: d.train_cap }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { ngram_min: 1, ngram_max: 2, max_features: DEFAULT_MAX_FEATURES }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Test-split rows drawn for the projection; 0 disables it.
    pub sample_size: usize,
    pub pca_components: usize,
    pub tsne: TsneConfig,
    pub svg: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { sample_size: 1000, pca_components: 50, tsne: TsneConfig::default(), svg: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub threshold: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { threshold: 0.5 }
    }
}

/// Everything an experiment run depends on. Component seeds are overwritten
/// by the experiment seed, so one value reproduces the whole run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub build: BuildConfig,
    pub split: SplitParams,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub evaluation: EvaluationConfig,
    pub projection: ProjectionConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut().filter(|q| q.is_relative()) {
                *q = base.join(&*q);
            }
        };
        rebase(&mut cfg.paths.codebook_dir);
        rebase(&mut cfg.paths.templates);
        rebase(&mut cfg.paths.work_dir);
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, PipelineError> {
        self.seed.ok_or_else(|| PipelineError::Config("`seed` is mandatory (config file or --seed)".into()))
    }

    /// Copies the experiment seed into every seeded component.
    pub fn propagate_seed(&mut self) -> Result<u64, PipelineError> {
        let seed = self.seed()?;
        self.synth.seed = seed;
        self.train.seed = seed;
        self.projection.tsne.seed = seed;
        Ok(seed)
    }

    pub fn split_config(&self) -> Result<SplitConfig, PipelineError> {
        Ok(SplitConfig {
            test_fraction: self.split.test_fraction,
            validation_fraction: self.split.validation_fraction,
            train_cap: self.split.train_cap,
            seed: self.seed()?,
        })
    }

    /// Checks everything that can be checked before any work is done.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.seed()?;
        self.synth.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let f = &self.features;
        if f.ngram_min == 0 || f.ngram_min > f.ngram_max {
            return Err(PipelineError::Config(format!("invalid ngram range ({}, {})", f.ngram_min, f.ngram_max)));
        }
        if f.max_features == 0 {
            return Err(PipelineError::Config("max_features must be at least 1".into()));
        }
        let t = self.evaluation.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(PipelineError::Config(format!("threshold {t} not in [0, 1]")));
        }
        if self.projection.sample_size > 0 {
            if self.projection.pca_components == 0 {
                return Err(PipelineError::Config("pca_components must be at least 1".into()));
            }
            self.projection.tsne.validate(self.projection.sample_size).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        for (name, p) in [("codebook_dir", &self.paths.codebook_dir), ("templates", &self.paths.templates)] {
            if let Some(p) = p.as_ref().filter(|p| !p.exists()) {
                return Err(PipelineError::Config(format!("paths.{name} {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
