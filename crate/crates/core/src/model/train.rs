use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::check_labels;
use super::metrics::auprc;
use super::{batch_loss_and_gradient, predict_scores, weighted_ce_loss, LinearModel, ModelError};
use crate::features::CsrMatrix;
use crate::scalar::Real;

/// RNG stream reserved for mini-batch shuffling.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "weights")]
pub enum ClassWeights {
    /// `w_c = N / (2 N_c)` from the training labels.
    Balanced,
    Uniform,
    Custom([f64; 2]),
}

impl ClassWeights {
    pub fn resolve(self, labels: &[u8]) -> Result<[f64; 2], ModelError> {
        match self {
            ClassWeights::Uniform => Ok([1.0, 1.0]),
            ClassWeights::Custom(w) => {
                if w.iter().all(|&x| x > 0.0 && x.is_finite()) {
                    Ok(w)
                } else {
                    Err(ModelError::Config(format!("class weights {w:?} must be positive")))
                }
            }
            ClassWeights::Balanced => {
                let n1 = labels.iter().filter(|&&y| y == 1).count();
                let n0 = labels.len() - n1;
                if n0 == 0 || n1 == 0 {
                    return Err(ModelError::SingleClass { positives: n1, negatives: n0 });
                }
                let n = labels.len() as f64;
                Ok([n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Decoupled decay applied to the weights, not the bias.
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub class_weights: ClassWeights,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2,
            learning_rate: 5e-4,
            weight_decay: 0.01,
            warmup_ratio: 0.05,
            batch_size: 32,
            seed: 0,
            class_weights: ClassWeights::Balanced,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad(format!("warmup_ratio {} not in [0, 1)", self.warmup_ratio));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("Adam moments must lie in [0, 1) and epsilon be positive".into());
        }
        Ok(())
    }

    pub fn total_steps(&self, n_train: usize) -> usize {
        self.epochs * n_train.div_ceil(self.batch_size)
    }

    pub fn warmup_steps(&self, n_train: usize) -> usize {
        (self.warmup_ratio * self.total_steps(n_train) as f64).ceil() as usize
    }

    /// Learning rate at 0-based `step`: linear ramp over the warmup, then flat.
    pub fn learning_rate_at(&self, step: usize, warmup_steps: usize) -> f64 {
        if step < warmup_steps {
            self.learning_rate * (step + 1) as f64 / warmup_steps as f64
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_auprc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport<T> {
    pub model: LinearModel<T>,
    /// 1-based epoch whose end-of-epoch parameters were kept.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub class_weights: [f64; 2],
    pub steps: usize,
}

struct AdamW<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> AdamW<T> {
    fn new(dim: usize) -> Self {
        AdamW { m: vec![T::zero(); dim], v: vec![T::zero(); dim], t: 0 }
    }

    /// One step over every parameter; only the first `decayed` parameters
    /// receive weight decay.
    fn step(&mut self, params: &mut [T], grad: &[T], lr: f64, cfg: &TrainConfig, decayed: usize) {
        self.t += 1;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let one = T::one();
        let c1 = one - b1.powi(self.t);
        let c2 = one - b2.powi(self.t);
        let (lr, wd, eps) = (T::of(lr), T::of(cfg.weight_decay), T::of(cfg.epsilon));
        for j in 0..params.len() {
            let g = grad[j];
            self.m[j] = b1 * self.m[j] + (one - b1) * g;
            self.v[j] = b2 * self.v[j] + (one - b2) * g * g;
            let m_hat = self.m[j] / c1;
            let v_hat = self.v[j] / c2;
            let mut update = m_hat / (v_hat.sqrt() + eps);
            if j < decayed {
                update = update + wd * params[j];
            }
            params[j] = params[j] - lr * update;
        }
    }
}

fn validation_loss<T: Real>(scores: &[T], labels: &[u8], weights: [T; 2]) -> Result<f64, ModelError> {
    Ok(weighted_ce_loss(scores, labels, weights)?.0.as_f64())
}

/// Mini-batch AdamW on the class-weighted loss. The validation AUPRC is
/// measured after every epoch and the parameters of the best epoch are
/// returned (ties go to the earlier epoch).
pub fn train<T: Real>(
    x: &CsrMatrix<T>,
    y: &[u8],
    x_val: &CsrMatrix<T>,
    y_val: &[u8],
    config: &TrainConfig,
) -> Result<TrainReport<T>, ModelError> {
    config.validate()?;
    check_labels(y)?;
    check_labels(y_val)?;
    if x.n_rows() != y.len() {
        return Err(ModelError::Dimension { expected: x.n_rows(), found: y.len() });
    }
    if x_val.n_rows() != y_val.len() {
        return Err(ModelError::Dimension { expected: x_val.n_rows(), found: y_val.len() });
    }
    if x_val.n_cols() != x.n_cols() {
        return Err(ModelError::Dimension { expected: x.n_cols(), found: x_val.n_cols() });
    }
    if y.is_empty() {
        return Err(ModelError::Input("empty training set".into()));
    }
    let v1 = y_val.iter().filter(|&&v| v == 1).count();
    if v1 == 0 || v1 == y_val.len() {
        return Err(ModelError::SingleClass { positives: v1, negatives: y_val.len() - v1 });
    }
    let cw = config.class_weights.resolve(y)?;
    let cw_t = [T::of(cw[0]), T::of(cw[1])];

    let dim = x.n_cols();
    // parameters laid out as [weights..., bias]
    let mut params = vec![T::zero(); dim + 1];
    let mut grad = vec![T::zero(); dim + 1];
    let mut opt = AdamW::new(dim + 1);
    let warmup = config.warmup_steps(y.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut step = 0usize;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<T>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let loss = batch_loss_and_gradient(&params, x, y, batch, cw_t, &mut grad)?;
            loss_sum += loss.as_f64();
            batches += 1;
            let lr = config.learning_rate_at(step, warmup);
            opt.step(&mut params, &grad, lr, config, dim);
            step += 1;
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::Diverged { epoch, parameter: i });
        }
        let model = LinearModel { weights: params[..dim].to_vec(), bias: params[dim] };
        let scores = predict_scores(&model, x_val)?;
        let val_auprc = auprc(&scores, y_val)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            validation_loss: validation_loss(&scores, y_val, cw_t)?,
            validation_auprc: val_auprc,
        });
        if best.as_ref().is_none_or(|(a, _, _)| val_auprc > *a) {
            best = Some((val_auprc, epoch, params.clone()));
        }
    }
    let (_, best_epoch, p) = best.expect("at least one epoch");
    Ok(TrainReport {
        model: LinearModel { weights: p[..dim].to_vec(), bias: p[dim] },
        best_epoch,
        history,
        class_weights: cw,
        steps: step,
    })
}
