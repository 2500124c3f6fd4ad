//! Class-weighted logistic regression on sparse features and the evaluation
//! metrics used to compare classifiers.

mod loss;
mod metrics;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::CsrMatrix;
use crate::scalar::{sigmoid, Real};

pub use loss::{batch_loss_and_gradient, weighted_ce_loss};
pub use metrics::{auprc, classification_metrics, ConfusionMatrix, MetricsReport};
pub use train::{train, ClassWeights, EpochRecord, TrainConfig, TrainReport};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("label {value} at index {index} is not 0 or 1")]
    NonBinaryLabel { index: usize, value: u8 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("metric undefined: {positives} positive and {negatives} negative examples")]
    SingleClass { positives: usize, negatives: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("parameter {parameter} became non-finite in epoch {epoch}")]
    Diverged { epoch: usize, parameter: usize },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> LinearModel<T> {
    pub fn zeros(dim: usize) -> Self {
        LinearModel { weights: vec![T::zero(); dim], bias: T::zero() }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// Logits `w·x + b` per row.
pub fn predict_scores<T: Real>(model: &LinearModel<T>, x: &CsrMatrix<T>) -> Result<Vec<T>, ModelError> {
    if x.n_cols() != model.dim() {
        return Err(ModelError::Dimension { expected: model.dim(), found: x.n_cols() });
    }
    Ok((0..x.n_rows()).into_par_iter().map(|i| x.row(i).dot(&model.weights) + model.bias).collect())
}

/// `σ(w·x + b)` per row.
pub fn predict_proba<T: Real>(model: &LinearModel<T>, x: &CsrMatrix<T>) -> Result<Vec<T>, ModelError> {
    Ok(predict_scores(model, x)?.into_iter().map(sigmoid).collect())
}

/// Saved classifier with enough context to check it against a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub scalar: String,
    pub vocabulary_hash: String,
    pub dimension: usize,
    pub model: LinearModel<f64>,
    pub train_config: TrainConfig,
    pub class_weights: [f64; 2],
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl ModelArtifact {
    pub fn from_report<T: Real>(report: &TrainReport<T>, config: &TrainConfig, vocabulary_hash: &str) -> ModelArtifact {
        ModelArtifact {
            schema_version: MODEL_SCHEMA_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            vocabulary_hash: vocabulary_hash.to_string(),
            dimension: report.model.dim(),
            model: LinearModel {
                weights: report.model.weights.iter().map(|w| w.as_f64()).collect(),
                bias: report.model.bias.as_f64(),
            },
            train_config: *config,
            class_weights: report.class_weights,
            best_epoch: report.best_epoch,
            history: report.history.clone(),
        }
    }

    pub fn model_as<T: Real>(&self) -> LinearModel<T> {
        LinearModel { weights: self.model.weights.iter().map(|&w| T::of(w)).collect(), bias: T::of(self.model.bias) }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let text = serde_json::to_string_pretty(self).expect("artifact serializes");
        fs::write(path, text + "\n").map_err(|e| ModelError::Artifact { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<ModelArtifact, ModelError> {
        let err = |message: String| ModelError::Artifact { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let a: ModelArtifact = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if a.schema_version != MODEL_SCHEMA_VERSION {
            return Err(err(format!("unsupported schema_version {}", a.schema_version)));
        }
        if a.model.weights.len() != a.dimension {
            return Err(err(format!("{} weights for dimension {}", a.model.weights.len(), a.dimension)));
        }
        Ok(a)
    }
}
