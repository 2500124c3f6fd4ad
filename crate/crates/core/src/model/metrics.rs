use serde::{Deserialize, Serialize};

use super::loss::check_labels;
use super::ModelError;
use crate::scalar::Real;

fn class_counts(labels: &[u8]) -> Result<(usize, usize), ModelError> {
    check_labels(labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass { positives: pos, negatives: neg });
    }
    Ok((pos, neg))
}

/// Average precision: positives visited in descending score order (ties in
/// input order), each contributing the precision at its rank divided by the
/// number of positives. No interpolation.
pub fn auprc<T: Real>(scores: &[T], labels: &[u8]) -> Result<f64, ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::Dimension { expected: scores.len(), found: labels.len() });
    }
    let (pos, _) = class_counts(labels)?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(ModelError::Input(format!("score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN"));
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
            ap += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / pos as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    /// Positive prediction iff `p >= threshold`.
    pub fn at_threshold<T: Real>(probabilities: &[T], labels: &[u8], threshold: f64) -> ConfusionMatrix {
        let mut m = ConfusionMatrix { tp: 0, fp: 0, tn: 0, fn_: 0 };
        for (&p, &y) in probabilities.iter().zip(labels) {
            match (p.as_f64() >= threshold, y == 1) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub balanced_accuracy: f64,
    pub auprc: f64,
    pub f1_macro: f64,
    pub precision_1: f64,
    pub recall_1: f64,
    pub precision_0: f64,
    pub recall_0: f64,
    pub prevalence: f64,
    pub n: usize,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    /// Metrics whose denominator was zero and were set to 0.
    pub zero_division: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Confusion-matrix metrics at `threshold` plus AUPRC of the probabilities.
pub fn classification_metrics<T: Real>(probabilities: &[T], labels: &[u8], threshold: f64) -> Result<MetricsReport, ModelError> {
    let auprc = auprc(probabilities, labels)?;
    let (pos, _) = class_counts(labels)?;
    let c = ConfusionMatrix::at_threshold(probabilities, labels, threshold);
    let mut flags = Vec::new();
    let precision_1 = ratio(c.tp, c.tp + c.fp, "precision_1", &mut flags);
    let recall_1 = ratio(c.tp, c.tp + c.fn_, "recall_1", &mut flags);
    let precision_0 = ratio(c.tn, c.tn + c.fn_, "precision_0", &mut flags);
    let recall_0 = ratio(c.tn, c.tn + c.fp, "recall_0", &mut flags);
    Ok(MetricsReport {
        balanced_accuracy: (recall_0 + recall_1) / 2.0,
        auprc,
        f1_macro: (f1(precision_0, recall_0) + f1(precision_1, recall_1)) / 2.0,
        precision_1,
        recall_1,
        precision_0,
        recall_0,
        prevalence: pos as f64 / labels.len() as f64,
        n: labels.len(),
        threshold,
        confusion: c,
        zero_division: flags,
    })
}
